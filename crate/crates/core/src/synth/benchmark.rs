use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scene::{render_scene, SceneSpec};
use super::weather::{gen_weather, WeatherParams};
use crate::error::{Error, Result};
use crate::par;
use crate::raster::{erode_labels, write_labels, write_series, LabelGrid, RasterTimeSeries, Split};
use crate::rng::SplitMix64;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Synthetic cross-year benchmark: every scene gets its own weather year;
/// test scenes additionally get `weather_shift` days of seasonal delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Phase offset in days applied to test-year weather.
    pub weather_shift: f64,
    /// Each scene's weather phase is additionally jittered by
    /// `uniform(-j, j)` days so training sees a spread of season timings.
    pub phase_jitter_days: f64,
    /// Boundary erosion levels applied to the label rasters.
    pub label_erosion: usize,
    pub scene: SceneSpec,
    /// Template; `seed` and `phase_shift` are overwritten per scene.
    pub weather: WeatherParams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 0,
            n_train: 8,
            n_val: 2,
            n_test: 4,
            weather_shift: 20.0,
            phase_jitter_days: 25.0,
            label_erosion: 1,
            scene: SceneSpec::with_default_crops(64, 64),
            weather: WeatherParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub split: Split,
    pub scene_seed: u64,
    pub weather_seed: u64,
    /// Total phase offset of this scene's weather, days.
    pub phase_shift: f64,
    pub satellite: String,
    pub weather: String,
    pub labels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub weather_shift: f64,
    pub class_table: Vec<String>,
    pub scenes: Vec<SceneEntry>,
}

impl DatasetManifest {
    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(&path, e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// One scene held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneData {
    pub entry: SceneEntry,
    pub satellite: RasterTimeSeries,
    pub weather: RasterTimeSeries,
    pub labels: LabelGrid,
}

impl SceneData {
    /// Loads the three rasters of `entry` from `dir`.
    pub fn load(dir: impl AsRef<Path>, entry: &SceneEntry) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(SceneData {
            entry: entry.clone(),
            satellite: crate::raster::read_series(dir.join(&entry.satellite))?,
            weather: crate::raster::read_series(dir.join(&entry.weather))?,
            labels: crate::raster::read_labels(dir.join(&entry.labels))?,
        })
    }
}

fn scene_entries(cfg: &BenchmarkConfig) -> Vec<SceneEntry> {
    let mut jitter = SplitMix64::derive(cfg.seed, 0x4a49_5454);
    let splits = [(Split::Train, cfg.n_train), (Split::Val, cfg.n_val), (Split::Test, cfg.n_test)];
    let mut out = Vec::new();
    for (split, n) in splits {
        for k in 0..n {
            let ordinal = out.len() as u64;
            let name = match split {
                Split::Train => "train",
                Split::Val => "val",
                _ => "test",
            };
            let id = format!("{name}_{k:03}");
            let j = if cfg.phase_jitter_days > 0.0 {
                jitter.uniform(-cfg.phase_jitter_days, cfg.phase_jitter_days)
            } else {
                0.0
            };
            let shift = if split == Split::Test { cfg.weather_shift } else { 0.0 };
            out.push(SceneEntry {
                satellite: format!("{id}.sat.rts"),
                weather: format!("{id}.wx.rts"),
                labels: format!("{id}.lbl.rts"),
                id,
                split,
                scene_seed: SplitMix64::derive(cfg.seed, 2 * ordinal + 100).next_u64(),
                weather_seed: SplitMix64::derive(cfg.seed, 2 * ordinal + 101).next_u64(),
                phase_shift: j + shift,
            });
        }
    }
    out
}

/// Generates every scene in memory, in train, val, test order.
pub fn build_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<SceneData>> {
    cfg.scene.validate()?;
    let entries = scene_entries(cfg);
    par::map_slice(&entries, |entry| -> Result<SceneData> {
        let weather = gen_weather(&WeatherParams {
            seed: entry.weather_seed,
            phase_shift: entry.phase_shift,
            ..cfg.weather.clone()
        });
        let (satellite, labels) = render_scene(&cfg.scene, &weather, entry.scene_seed)?;
        let labels = erode_labels(&labels, cfg.label_erosion);
        Ok(SceneData { entry: entry.clone(), satellite, weather, labels })
    })
    .into_iter()
    .collect()
}

/// Writes the benchmark to `dir`: three RTS files per scene plus
/// `manifest.json`.
pub fn gen_benchmark(cfg: &BenchmarkConfig, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scenes = build_benchmark(cfg)?;
    for s in &scenes {
        write_series(dir.join(&s.entry.satellite), &s.satellite)?;
        write_series(dir.join(&s.entry.weather), &s.weather)?;
        write_labels(dir.join(&s.entry.labels), &s.labels)?;
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        weather_shift: cfg.weather_shift,
        class_table: cfg.scene.class_table(),
        scenes: scenes.into_iter().map(|s| s.entry).collect(),
    };
    manifest.write(dir)?;
    Ok(manifest)
}
