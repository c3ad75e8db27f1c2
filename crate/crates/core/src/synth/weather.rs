use serde::{Deserialize, Serialize};

use crate::raster::RasterTimeSeries;
use crate::rng::SplitMix64;

/// Daymet band roles, in storage order.
pub const WEATHER_BANDS: [&str; 7] = ["dayl", "prcp", "srad", "swe", "tmax", "tmin", "vp"];

/// Seasonal mean-temperature sinusoid `offset + amplitude·cos(2π(d − peak_day)/365)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TempCurve {
    pub amplitude: f64,
    pub peak_day: f64,
    pub offset: f64,
}

impl Default for TempCurve {
    fn default() -> Self {
        TempCurve { amplitude: 12.0, peak_day: 196.0, offset: 14.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeatherParams {
    pub seed: u64,
    pub days: usize,
    pub mean_temp_curve: TempCurve,
    /// Day-to-day noise shared by tmax and tmin, °C.
    pub temp_noise_sd: f64,
    /// Constant tmax − tmin, °C.
    pub temp_spread: f64,
    /// Mean precipitation, mm/day.
    pub precip_rate: f64,
    /// Phase offset in days; positive values delay the season.
    pub phase_shift: f64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        WeatherParams {
            seed: 0,
            days: 365,
            mean_temp_curve: TempCurve::default(),
            temp_noise_sd: 1.0,
            temp_spread: 10.0,
            precip_rate: 0.6,
            phase_shift: 0.0,
        }
    }
}

const WET_DAY_PROB: f64 = 0.3;
const MELT_MM_PER_DEG: f64 = 2.0;

/// Daily `days × 7 × 1 × 1` series; tmax − tmin always equals `temp_spread`.
pub fn gen_weather(params: &WeatherParams) -> RasterTimeSeries {
    let mut rng = SplitMix64::derive(params.seed, 0x5745_4154);
    let curve = &params.mean_temp_curve;
    let tau = 2.0 * std::f64::consts::PI / 365.0;
    let mut values = vec![0f32; params.days * 7];
    let mut swe = 0.0f64;
    for d in 0..params.days {
        let day = d as f64;
        let noise = if params.temp_noise_sd > 0.0 { params.temp_noise_sd * rng.normal() } else { 0.0 };
        let tmean = curve.offset + curve.amplitude * (tau * (day - curve.peak_day - params.phase_shift)).cos() + noise;
        let tmax = tmean + params.temp_spread / 2.0;
        let tmin = tmean - params.temp_spread / 2.0;
        let wet = rng.bernoulli(WET_DAY_PROB);
        let amount = rng.exponential(params.precip_rate / WET_DAY_PROB);
        let prcp = if wet { amount } else { 0.0 };
        let season = (tau * (day - 80.0)).sin();
        let dayl = 43_200.0 + 10_800.0 * season;
        let srad = 200.0 + 150.0 * season - if wet { 60.0 } else { 0.0 };
        swe = if tmean < 0.0 { swe + prcp } else { (swe - MELT_MM_PER_DEG * tmean).max(0.0) };
        let vp = 611.0 * (17.27 * tmin / (tmin + 237.3)).exp();
        let row = [dayl, prcp, srad, swe, tmax, tmin, vp];
        for (b, v) in row.iter().enumerate() {
            values[d * 7 + b] = *v as f32;
        }
    }
    RasterTimeSeries::new(
        [params.days, 7, 1, 1],
        values,
        WEATHER_BANDS.iter().map(|s| s.to_string()).collect(),
        1,
        0,
        None,
    )
    .expect("generated weather is valid")
}

/// Pulls one named band out of a single-cell weather series as `f64`.
pub(crate) fn band(weather: &RasterTimeSeries, name: &str) -> Option<Vec<f64>> {
    let b = weather.band_names.iter().position(|n| n == name)?;
    Some((0..weather.timestamps()).map(|t| weather.get(t, b, 0, 0) as f64).collect())
}
