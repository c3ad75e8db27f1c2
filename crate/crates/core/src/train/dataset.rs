use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::error::{Error, Result};
use crate::raster::{
    boundary_exclusion_mask, compute_norm_stats, normalize_minmax, EvalMask, LabelGrid, NormStats, RasterTimeSeries, Split,
};
use crate::synth::{DatasetManifest, SceneData};
use crate::Tensor;

pub const PREP_FILE: &str = "prep.json";

/// Preprocessing record written next to a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepInfo {
    pub erode: usize,
    pub min_component: usize,
    /// Pixels within this distance of a scene edge are excluded from loss
    /// and metrics.
    pub margin: usize,
    pub sat_stats: NormStats,
    pub weather_stats: NormStats,
}

impl PrepInfo {
    pub fn read(dir: impl AsRef<Path>) -> Result<Option<Self>> {
        let path = dir.as_ref().join(PREP_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map(Some).map_err(|e| Error::json(&path, e))
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(PREP_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(&path, e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// A normalized scene ready for the model.
#[derive(Debug, Clone)]
pub struct SceneSample {
    pub id: String,
    pub split: Split,
    /// Min-max normalized satellite series.
    pub sat: RasterTimeSeries,
    /// Min-max normalized daily weather, `T_w × C_w`.
    pub weather: Tensor,
    pub labels: LabelGrid,
    /// Margin mask intersected with known labels.
    pub mask: EvalMask,
}

impl SceneSample {
    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    /// `T × C × p × p` satellite crop in double precision.
    pub fn sat_patch(&self, row0: usize, col0: usize, p: usize) -> Tensor {
        let [t_n, c, _, _] = self.sat.dims();
        let mut data = Vec::with_capacity(t_n * c * p * p);
        for t in 0..t_n {
            for b in 0..c {
                for i in row0..row0 + p {
                    let start = self.sat.index(t, b, i, col0);
                    data.extend(self.sat.values()[start..start + p].iter().map(|&v| v as f64));
                }
            }
        }
        Tensor::from_vec(&[t_n, c, p, p], data).expect("patch shape")
    }
}

/// Normalized scenes plus the statistics used to normalize them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub class_table: Vec<String>,
    pub unknown_id: u16,
    pub sat_stats: NormStats,
    pub weather_stats: NormStats,
    pub margin: usize,
    pub scenes: Vec<SceneSample>,
}

/// Collapses a weather series to one reading per day (spatial mean) as a
/// `T_w × C_w` tensor.
fn weather_tensor(w: &RasterTimeSeries) -> Tensor {
    let m = if w.height() == 1 && w.width() == 1 { w.clone() } else { w.spatial_mean() };
    let (t_n, c) = (m.timestamps(), m.channels());
    Tensor::from_vec(&[t_n, c], m.values().iter().map(|&v| v as f64).collect()).expect("weather shape")
}

impl Dataset {
    /// Normalizes `scenes` with min-max statistics from the train split
    /// (or with `stats` when given).
    pub fn from_scenes(scenes: Vec<SceneData>, margin: usize, stats: Option<(NormStats, NormStats)>) -> Result<Self> {
        let first = scenes.first().ok_or_else(|| TrainError::Data("dataset has no scenes".into()))?;
        let class_table = first.labels.class_table.clone();
        let unknown_id = first.labels.unknown_id;
        let (sat_stats, weather_stats) = match stats {
            Some(s) => s,
            None => {
                let train: Vec<&SceneData> = scenes.iter().filter(|s| s.entry.split == Split::Train).collect();
                if train.is_empty() {
                    return Err(TrainError::Data("no train scenes to compute normalization from".into()).into());
                }
                let sat: Vec<&RasterTimeSeries> = train.iter().map(|s| &s.satellite).collect();
                let wx: Vec<&RasterTimeSeries> = train.iter().map(|s| &s.weather).collect();
                (compute_norm_stats(&sat)?, compute_norm_stats(&wx)?)
            }
        };
        let mut out = Vec::with_capacity(scenes.len());
        for s in scenes {
            if s.labels.class_table != class_table {
                return Err(TrainError::Data(format!("scene {} has a different class table", s.entry.id)).into());
            }
            let [_, _, h, w] = s.satellite.dims();
            if (h, w) != (s.labels.height(), s.labels.width()) {
                return Err(TrainError::Data(format!("scene {}: labels do not match satellite size", s.entry.id)).into());
            }
            let mask = boundary_exclusion_mask(h, w, margin).and_known(&s.labels);
            out.push(SceneSample {
                sat: normalize_minmax(&s.satellite, &sat_stats)?,
                weather: weather_tensor(&normalize_minmax(&s.weather, &weather_stats)?),
                labels: s.labels,
                mask,
                id: s.entry.id,
                split: s.entry.split,
            });
        }
        Ok(Dataset { class_table, unknown_id, sat_stats, weather_stats, margin, scenes: out })
    }

    /// Loads a dataset directory. A `prep.json` (written by preprocessing)
    /// supplies the normalization statistics and margin; otherwise they are
    /// computed here with `margin`.
    pub fn load(dir: impl AsRef<Path>, margin: usize) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = DatasetManifest::read(dir)?;
        let scenes = manifest.scenes.iter().map(|e| SceneData::load(dir, e)).collect::<Result<Vec<_>>>()?;
        match PrepInfo::read(dir)? {
            Some(p) => Self::from_scenes(scenes, p.margin, Some((p.sat_stats, p.weather_stats))),
            None => Self::from_scenes(scenes, margin, None),
        }
    }

    pub fn split(&self, split: Split) -> Vec<&SceneSample> {
        self.scenes.iter().filter(|s| s.split == split).collect()
    }

    pub fn scene(&self, id: &str) -> Option<&SceneSample> {
        self.scenes.iter().find(|s| s.id == id)
    }

    pub fn classes(&self) -> usize {
        self.class_table.len()
    }

    pub fn sat_channels(&self) -> usize {
        self.sat_stats.bands()
    }

    pub fn weather_channels(&self) -> usize {
        self.weather_stats.bands()
    }

    pub fn sat_step_days(&self) -> u32 {
        self.scenes.first().map_or(15, |s| s.sat.step_days)
    }
}

/// Top-left corners of `p`-sized tiles covering an `h × w` scene: a
/// regular grid, with the last row/column shifted inwards when `p` does
/// not divide the size.
pub fn tile_origins(h: usize, w: usize, p: usize) -> Vec<(usize, usize)> {
    let axis = |n: usize| -> Vec<usize> {
        if p == 0 || n < p {
            return Vec::new();
        }
        let mut v: Vec<usize> = (0..=n - p).step_by(p).collect();
        if v.last() != Some(&(n - p)) {
            v.push(n - p);
        }
        v
    };
    let rows = axis(h);
    let cols = axis(w);
    rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect()
}
