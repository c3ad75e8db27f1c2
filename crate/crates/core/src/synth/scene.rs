use serde::{Deserialize, Serialize};

use super::phenology::{canopy_fraction, gdd_accumulate, CropSpec};
use super::weather::band;
use super::GDD_BASE_C;
use crate::raster::{LabelGrid, RasterError, RasterTimeSeries};
use crate::rng::SplitMix64;

/// Layout and sensor model of one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub h: usize,
    pub w: usize,
    /// Side of the square fields, pixels.
    pub field_size: usize,
    /// Crops and their share of fields; shares must sum to 1.
    pub crop_mix: Vec<(CropSpec, f64)>,
    /// Gaussian reflectance noise per composite.
    pub noise_sd: f64,
    /// Per-timestamp probability that a composite is clouded out.
    pub cloud_prob: f64,
    #[serde(default = "default_step")]
    pub step_days: u32,
    #[serde(default = "default_timestamps")]
    pub timestamps: usize,
    #[serde(default = "default_base")]
    pub gdd_base: f64,
}

fn default_step() -> u32 {
    15
}
fn default_timestamps() -> usize {
    24
}
fn default_base() -> f64 {
    GDD_BASE_C
}

pub const BAND_NAMES: [&str; 10] = ["B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B11", "B12"];

const SOIL: [f64; 10] = [0.12, 0.15, 0.19, 0.23, 0.26, 0.28, 0.30, 0.32, 0.34, 0.28];

/// Five illustrative crop presets on ten Sentinel-2-like bands.
///
/// `orchard` is evergreen; `spring_grain` has its own signature and an
/// early harvest. `short_row`, `long_row` and `late_row` share one
/// signature and differ only in their degree-day calendars: short and long
/// split at the mid-season harvest, long and late split at emergence and
/// at the autumn harvest.
pub fn default_crops() -> Vec<CropSpec> {
    let mk = |class_id, name: &str, plant, peak, harvest, sig: [f64; 10], evergreen| CropSpec {
        class_id,
        name: name.into(),
        gdd_plant: plant,
        gdd_peak: peak,
        gdd_harvest: harvest,
        peak_signature: sig.to_vec(),
        bare_signature: SOIL.to_vec(),
        evergreen,
    };
    let orchard = [0.04, 0.07, 0.05, 0.20, 0.35, 0.42, 0.45, 0.47, 0.22, 0.12];
    let grain = [0.06, 0.10, 0.08, 0.25, 0.40, 0.50, 0.55, 0.56, 0.28, 0.16];
    let row = [0.03, 0.08, 0.04, 0.15, 0.45, 0.60, 0.65, 0.68, 0.25, 0.12];
    vec![
        mk(1, "orchard", 100.0, 400.0, 1.0e9, orchard, true),
        mk(2, "spring_grain", 50.0, 300.0, 700.0, grain, false),
        mk(3, "short_row", 150.0, 450.0, 900.0, row, false),
        mk(4, "long_row", 150.0, 450.0, 2100.0, row, false),
        mk(5, "late_row", 700.0, 1000.0, 1.0e9, row, false),
    ]
}

impl SceneSpec {
    pub fn with_default_crops(h: usize, w: usize) -> Self {
        let crops = default_crops();
        let share = 1.0 / crops.len() as f64;
        SceneSpec {
            h,
            w,
            field_size: 8,
            crop_mix: crops.into_iter().map(|c| (c, share)).collect(),
            noise_sd: 0.02,
            cloud_prob: 0.05,
            step_days: default_step(),
            timestamps: default_timestamps(),
            gdd_base: GDD_BASE_C,
        }
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        let bad = |m: String| Err(RasterError::Invalid(m));
        if self.h == 0 || self.w == 0 || self.field_size == 0 {
            return bad("scene and field sizes must be positive".into());
        }
        if self.crop_mix.is_empty() {
            return bad("crop_mix is empty".into());
        }
        let total: f64 = self.crop_mix.iter().map(|(_, f)| f).sum();
        if (total - 1.0).abs() > 1e-9 || self.crop_mix.iter().any(|(_, f)| *f < 0.0) {
            return bad(format!("crop fractions must be non-negative and sum to 1, got {total}"));
        }
        if !(0.0..1.0).contains(&self.cloud_prob) {
            return bad(format!("cloud_prob {} outside [0, 1)", self.cloud_prob));
        }
        let bands = self.crop_mix[0].0.peak_signature.len();
        for (c, _) in &self.crop_mix {
            c.validate().map_err(RasterError::Invalid)?;
            if c.peak_signature.len() != bands {
                return bad(format!("{} has {} bands, expected {bands}", c.name, c.peak_signature.len()));
            }
            if c.class_id == 0 {
                return bad(format!("{}: class id 0 is reserved for unknown", c.name));
            }
        }
        Ok(())
    }

    pub fn bands(&self) -> usize {
        self.crop_mix[0].0.peak_signature.len()
    }

    /// `["unknown", crop names...]` indexed by class id.
    pub fn class_table(&self) -> Vec<String> {
        let n = self.crop_mix.iter().map(|(c, _)| c.class_id as usize).max().unwrap_or(0) + 1;
        let mut table: Vec<String> = (0..n).map(|i| format!("class_{i}")).collect();
        table[0] = "unknown".into();
        for (c, _) in &self.crop_mix {
            table[c.class_id as usize] = c.name.clone();
        }
        table
    }
}

/// Noise-free composite reflectance of `crop`: `T × bands`, window means of
/// the daily canopy mixture.
pub fn crop_composites(crop: &CropSpec, gdd: &[f64], step_days: u32, timestamps: usize) -> Vec<Vec<f64>> {
    let step = step_days as usize;
    (0..timestamps)
        .map(|t| {
            let window = &gdd[t * step..(t + 1) * step];
            let canopy = window.iter().map(|&g| canopy_fraction(crop, g)).sum::<f64>() / step as f64;
            crop.peak_signature
                .iter()
                .zip(&crop.bare_signature)
                .map(|(p, b)| canopy * p + (1.0 - canopy) * b)
                .collect()
        })
        .collect()
}

/// Renders a labeled scene.
///
/// Fields are `field_size` squares whose crops are drawn from `crop_mix`.
/// Satellite values are `T × bands × h × w` composites (window mean of
/// the daily mixture plus Gaussian noise); a clouded timestamp repeats the
/// previous composite.
pub fn render_scene(
    scene: &SceneSpec,
    weather: &RasterTimeSeries,
    seed: u64,
) -> Result<(RasterTimeSeries, LabelGrid), RasterError> {
    scene.validate()?;
    if weather.height() != 1 || weather.width() != 1 {
        return Err(RasterError::Invalid(format!(
            "weather must be a single cell per scene, got {}x{}",
            weather.height(),
            weather.width()
        )));
    }
    let days_needed = scene.step_days as usize * scene.timestamps;
    if weather.step_days != 1 || weather.timestamps() < days_needed {
        return Err(RasterError::Invalid(format!(
            "need {days_needed} daily weather steps, got {} at step {}",
            weather.timestamps(),
            weather.step_days
        )));
    }
    let tmin = band(weather, "tmin").ok_or_else(|| RasterError::Invalid("weather lacks tmin".into()))?;
    let tmax = band(weather, "tmax").ok_or_else(|| RasterError::Invalid("weather lacks tmax".into()))?;
    let gdd = gdd_accumulate(&tmin, &tmax, scene.gdd_base).map_err(RasterError::Invalid)?;

    let (h, w, t_n, bands) = (scene.h, scene.w, scene.timestamps, scene.bands());
    let mut field_rng = SplitMix64::derive(seed, 1);
    let fields_y = h.div_ceil(scene.field_size);
    let fields_x = w.div_ceil(scene.field_size);
    let field_crop: Vec<usize> = (0..fields_y * fields_x)
        .map(|_| {
            let u = field_rng.next_f64();
            let mut acc = 0.0;
            scene
                .crop_mix
                .iter()
                .position(|(_, f)| {
                    acc += f;
                    u < acc
                })
                .unwrap_or(scene.crop_mix.len() - 1)
        })
        .collect();

    let composites: Vec<Vec<Vec<f64>>> = scene
        .crop_mix
        .iter()
        .map(|(c, _)| crop_composites(c, &gdd, scene.step_days, t_n))
        .collect();

    let table = scene.class_table();
    let mut ids = vec![0u16; h * w];
    for i in 0..h {
        for j in 0..w {
            let f = (i / scene.field_size) * fields_x + j / scene.field_size;
            ids[i * w + j] = scene.crop_mix[field_crop[f]].0.class_id;
        }
    }

    let mut noise_rng = SplitMix64::derive(seed, 2);
    let mut values = vec![0f32; t_n * bands * h * w];
    for t in 0..t_n {
        for b in 0..bands {
            for i in 0..h {
                for j in 0..w {
                    let f = (i / scene.field_size) * fields_x + j / scene.field_size;
                    let clean = composites[field_crop[f]][t][b];
                    let noise = if scene.noise_sd > 0.0 { scene.noise_sd * noise_rng.normal() } else { 0.0 };
                    values[((t * bands + b) * h + i) * w + j] = (clean + noise) as f32;
                }
            }
        }
    }
    let mut cloud_rng = SplitMix64::derive(seed, 3);
    let per_t = bands * h * w;
    for t in 1..t_n {
        if cloud_rng.bernoulli(scene.cloud_prob) {
            values.copy_within((t - 1) * per_t..t * per_t, t * per_t);
        }
    }

    let band_names = if bands == BAND_NAMES.len() {
        BAND_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..bands).map(|b| format!("b{b}")).collect()
    };
    let sat = RasterTimeSeries::new([t_n, bands, h, w], values, band_names, scene.step_days, 0, None)?;
    let labels = LabelGrid::new(h, w, ids, table, 0)?;
    Ok((sat, labels))
}
