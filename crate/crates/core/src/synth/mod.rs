//! Weather-driven synthetic crop scenes.
//!
//! Daily weather drives growing-degree-day accumulation, which drives each
//! crop's canopy fraction; canopy mixes a peak and a bare reflectance
//! signature into 15-day composites. Because the generator knows every
//! crop's true calendar, it serves as ground truth for the inverse model.

mod benchmark;
mod phenology;
mod scene;
mod weather;

pub use benchmark::{build_benchmark, gen_benchmark, BenchmarkConfig, DatasetManifest, SceneData, SceneEntry, MANIFEST_FILE};
pub use phenology::{canopy_fraction, gdd_accumulate, phenology_profile, CropSpec, EVERGREEN_FLOOR};
pub use scene::{crop_composites, default_crops, render_scene, SceneSpec, BAND_NAMES};
pub use weather::{gen_weather, TempCurve, WeatherParams, WEATHER_BANDS};

/// Default base temperature for degree-day accumulation, °C.
pub const GDD_BASE_C: f64 = 10.0;
