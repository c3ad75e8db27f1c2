//! Raster containers and preprocessing.
//!
//! A [`RasterTimeSeries`] holds either the satellite stack (`T × C × H × W`
//! composites) or the weather stack (daily, usually `1 × 1` spatially).
//! A [`LabelGrid`] holds the per-pixel class ids. Both persist in the `RTS1`
//! container implemented in [`io`].

mod grid;
pub mod io;
mod morphology;
mod normalize;
mod temporal;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{boundary_exclusion_mask, partition_grids, seeded_split, GridCell, GridLayout, Split};
pub use io::{read_labels, read_series, write_labels, write_series};
pub use morphology::{erode_labels, remove_small_components, Connectivity};
pub use normalize::{compute_norm_stats, normalize_minmax, NormStats};
pub use temporal::{months_horizon_len, truncate_months};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("bad magic {0:?}, expected \"RTS1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {found:?}, this build reads \"RTS1\"")]
    VersionMismatch { found: String },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("inconsistent container: {0}")]
    Inconsistent(String),
    #[error("invalid raster: {0}")]
    Invalid(String),
    #[error("band {band} ({name}) has no valid cells")]
    AllNodataBand { band: usize, name: String },
    #[error("band count mismatch: stats have {stats}, series has {series}")]
    BandMismatch { stats: usize, series: usize },
    #[error("invalid grid size {grid_px} for a {h}x{w} scene")]
    GridSize { grid_px: usize, h: usize, w: usize },
    #[error("truncating to {months} months leaves no timestamps (step {step_days} days)")]
    EmptyTruncation { months: u32, step_days: u32 },
    #[error("months must be in 1..=12, got {0}")]
    Months(u32),
}

/// Four-dimensional `T × C × H × W` series with band and calendar metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterTimeSeries {
    dims: [usize; 4],
    values: Vec<f32>,
    pub band_names: Vec<String>,
    /// Days between consecutive timestamps.
    pub step_days: u32,
    /// Zero-based day of year of the first timestamp.
    pub origin_day: u32,
    /// Sentinel marking missing cells; must be finite.
    pub nodata: Option<f32>,
}

impl RasterTimeSeries {
    pub fn new(
        dims: [usize; 4],
        values: Vec<f32>,
        band_names: Vec<String>,
        step_days: u32,
        origin_day: u32,
        nodata: Option<f32>,
    ) -> Result<Self, RasterError> {
        let series = RasterTimeSeries { dims, values, band_names, step_days, origin_day, nodata };
        series.validate()?;
        Ok(series)
    }

    /// Zero-filled series with generic band names.
    pub fn zeros(dims: [usize; 4], step_days: u32) -> Self {
        RasterTimeSeries {
            dims,
            values: vec![0.0; dims.iter().product()],
            band_names: (0..dims[1]).map(|c| format!("b{c}")).collect(),
            step_days,
            origin_day: 0,
            nodata: None,
        }
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        let [t, c, h, w] = self.dims;
        if t == 0 || c == 0 || h == 0 || w == 0 {
            return Err(RasterError::Invalid(format!("empty dims {:?}", self.dims)));
        }
        if self.values.len() != t * c * h * w {
            return Err(RasterError::Invalid(format!(
                "dims {:?} need {} values, got {}",
                self.dims,
                t * c * h * w,
                self.values.len()
            )));
        }
        if self.band_names.len() != c {
            return Err(RasterError::Invalid(format!(
                "{} band names for {c} channels",
                self.band_names.len()
            )));
        }
        if self.step_days == 0 {
            return Err(RasterError::Invalid("step_days must be >= 1".into()));
        }
        if let Some(nd) = self.nodata {
            if !nd.is_finite() {
                return Err(RasterError::Invalid("nodata sentinel must be finite".into()));
            }
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite() && !self.is_nodata(*v)) {
            return Err(RasterError::Invalid(format!("non-finite value at flat index {i}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn timestamps(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn is_nodata(&self, v: f32) -> bool {
        self.nodata == Some(v)
    }

    pub fn index(&self, t: usize, c: usize, i: usize, j: usize) -> usize {
        let [_, cn, h, w] = self.dims;
        ((t * cn + c) * h + i) * w + j
    }

    pub fn get(&self, t: usize, c: usize, i: usize, j: usize) -> f32 {
        self.values[self.index(t, c, i, j)]
    }

    pub fn set(&mut self, t: usize, c: usize, i: usize, j: usize, v: f32) {
        let k = self.index(t, c, i, j);
        self.values[k] = v;
    }

    /// Keeps the first `t` timestamps.
    pub fn head(&self, t: usize) -> RasterTimeSeries {
        let per_t = self.dims[1] * self.dims[2] * self.dims[3];
        RasterTimeSeries {
            dims: [t, self.dims[1], self.dims[2], self.dims[3]],
            values: self.values[..t * per_t].to_vec(),
            band_names: self.band_names.clone(),
            step_days: self.step_days,
            origin_day: self.origin_day,
            nodata: self.nodata,
        }
    }

    /// Spatial crop `[row0, row0+h) × [col0, col0+w)` over all timestamps and bands.
    pub fn crop(&self, row0: usize, col0: usize, h: usize, w: usize) -> RasterTimeSeries {
        let [t, c, _, _] = self.dims;
        let mut values = Vec::with_capacity(t * c * h * w);
        for tt in 0..t {
            for cc in 0..c {
                for i in row0..row0 + h {
                    let start = self.index(tt, cc, i, col0);
                    values.extend_from_slice(&self.values[start..start + w]);
                }
            }
        }
        RasterTimeSeries {
            dims: [t, c, h, w],
            values,
            band_names: self.band_names.clone(),
            step_days: self.step_days,
            origin_day: self.origin_day,
            nodata: self.nodata,
        }
    }

    /// Spatial mean per (t, c), ignoring nodata; used to collapse weather to
    /// one reading per grid.
    pub fn spatial_mean(&self) -> RasterTimeSeries {
        let [t, c, h, w] = self.dims;
        let mut values = Vec::with_capacity(t * c);
        for tt in 0..t {
            for cc in 0..c {
                let start = self.index(tt, cc, 0, 0);
                let (sum, n) = self.values[start..start + h * w]
                    .iter()
                    .filter(|v| !self.is_nodata(**v))
                    .fold((0.0f64, 0usize), |(s, n), &v| (s + v as f64, n + 1));
                values.push(if n == 0 { self.nodata.unwrap_or(0.0) } else { (sum / n as f64) as f32 });
            }
        }
        RasterTimeSeries {
            dims: [t, c, 1, 1],
            values,
            band_names: self.band_names.clone(),
            step_days: self.step_days,
            origin_day: self.origin_day,
            nodata: self.nodata,
        }
    }
}

/// Per-pixel class ids with the class table; `unknown_id` marks pixels
/// excluded from loss and metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    h: usize,
    w: usize,
    ids: Vec<u16>,
    pub class_table: Vec<String>,
    pub unknown_id: u16,
}

impl LabelGrid {
    pub fn new(
        h: usize,
        w: usize,
        ids: Vec<u16>,
        class_table: Vec<String>,
        unknown_id: u16,
    ) -> Result<Self, RasterError> {
        let grid = LabelGrid { h, w, ids, class_table, unknown_id };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        if self.h == 0 || self.w == 0 || self.ids.len() != self.h * self.w {
            return Err(RasterError::Invalid(format!(
                "label grid {}x{} with {} ids",
                self.h,
                self.w,
                self.ids.len()
            )));
        }
        let n = self.class_table.len();
        if self.unknown_id as usize >= n {
            return Err(RasterError::Invalid(format!(
                "unknown_id {} outside class table of {n}",
                self.unknown_id
            )));
        }
        if let Some(bad) = self.ids.iter().find(|&&id| id as usize >= n) {
            return Err(RasterError::Invalid(format!("class id {bad} outside class table of {n}")));
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    pub fn ids_mut(&mut self) -> &mut [u16] {
        &mut self.ids
    }

    pub fn num_classes(&self) -> usize {
        self.class_table.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.ids[i * self.w + j]
    }

    pub fn set(&mut self, i: usize, j: usize, id: u16) {
        self.ids[i * self.w + j] = id;
    }

    pub fn crop(&self, row0: usize, col0: usize, h: usize, w: usize) -> LabelGrid {
        let mut ids = Vec::with_capacity(h * w);
        for i in row0..row0 + h {
            ids.extend_from_slice(&self.ids[i * self.w + col0..i * self.w + col0 + w]);
        }
        LabelGrid { h, w, ids, class_table: self.class_table.clone(), unknown_id: self.unknown_id }
    }
}

/// Per-pixel validity used to restrict loss and metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalMask {
    pub h: usize,
    pub w: usize,
    pub valid: Vec<bool>,
}

impl EvalMask {
    pub fn all(h: usize, w: usize, value: bool) -> Self {
        EvalMask { h, w, valid: vec![value; h * w] }
    }

    pub fn count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.valid[i * self.w + j]
    }

    pub fn crop(&self, row0: usize, col0: usize, h: usize, w: usize) -> EvalMask {
        let mut valid = Vec::with_capacity(h * w);
        for i in row0..row0 + h {
            valid.extend_from_slice(&self.valid[i * self.w + col0..i * self.w + col0 + w]);
        }
        EvalMask { h, w, valid }
    }

    /// Mask of pixels whose label is not Unknown, intersected with `self`.
    pub fn and_known(&self, labels: &LabelGrid) -> EvalMask {
        let valid = self
            .valid
            .iter()
            .zip(labels.ids())
            .map(|(&v, &id)| v && id != labels.unknown_id)
            .collect();
        EvalMask { h: self.h, w: self.w, valid }
    }
}
