use serde::{Deserialize, Serialize};

/// Canopy fraction an evergreen crop keeps outside its growing season.
pub const EVERGREEN_FLOOR: f64 = 0.8;

/// Degree-day calendar and reflectance signatures of one crop class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropSpec {
    pub class_id: u16,
    pub name: String,
    /// Degree days at emergence.
    pub gdd_plant: f64,
    /// Degree days at full canopy.
    pub gdd_peak: f64,
    /// Degree days at harvest / leaf drop.
    pub gdd_harvest: f64,
    pub peak_signature: Vec<f64>,
    pub bare_signature: Vec<f64>,
    pub evergreen: bool,
}

impl CropSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gdd_plant < self.gdd_peak && self.gdd_peak < self.gdd_harvest) {
            return Err(format!("{}: need gdd_plant < gdd_peak < gdd_harvest", self.name));
        }
        if self.peak_signature.len() != self.bare_signature.len() {
            return Err(format!("{}: signature lengths differ", self.name));
        }
        let in_unit = |s: &[f64]| s.iter().all(|v| (0.0..=1.0).contains(v));
        if !in_unit(&self.peak_signature) || !in_unit(&self.bare_signature) {
            return Err(format!("{}: signatures must lie in [0, 1]", self.name));
        }
        Ok(())
    }
}

/// Cumulative growing degree days: `g[d] = Σ_{k<=d} max(0, (tmin_k + tmax_k)/2 − base)`.
pub fn gdd_accumulate(tmin: &[f64], tmax: &[f64], base_temp: f64) -> Result<Vec<f64>, String> {
    if tmin.len() != tmax.len() {
        return Err(format!("tmin has {} days, tmax has {}", tmin.len(), tmax.len()));
    }
    let mut acc = 0.0;
    Ok(tmin
        .iter()
        .zip(tmax)
        .map(|(lo, hi)| {
            acc += ((lo + hi) / 2.0 - base_temp).max(0.0);
            acc
        })
        .collect())
}

/// Canopy fraction at accumulated degree days `gdd`.
///
/// Zero before emergence, linear up to 1 at peak, 1 until harvest, then 0
/// for annuals. Evergreens never fall below [`EVERGREEN_FLOOR`].
pub fn canopy_fraction(crop: &CropSpec, gdd: f64) -> f64 {
    let seasonal = if gdd >= crop.gdd_harvest || gdd < crop.gdd_plant {
        0.0
    } else if gdd < crop.gdd_peak {
        (gdd - crop.gdd_plant) / (crop.gdd_peak - crop.gdd_plant)
    } else {
        1.0
    };
    if crop.evergreen {
        seasonal.max(EVERGREEN_FLOOR)
    } else {
        seasonal
    }
}

pub fn phenology_profile(crop: &CropSpec, gdd_series: &[f64], day_index: usize) -> f64 {
    canopy_fraction(crop, gdd_series[day_index])
}
