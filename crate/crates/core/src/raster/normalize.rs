use serde::{Deserialize, Serialize};

use super::{RasterError, RasterTimeSeries};

/// Per-band minimum and maximum, computed on the training split and reused
/// unchanged for validation and test scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub per_band_min: Vec<f64>,
    pub per_band_max: Vec<f64>,
}

impl NormStats {
    pub fn bands(&self) -> usize {
        self.per_band_min.len()
    }
}

/// Min/max per band over every non-nodata cell of every series.
pub fn compute_norm_stats(series: &[&RasterTimeSeries]) -> Result<NormStats, RasterError> {
    let first = series
        .first()
        .ok_or_else(|| RasterError::Invalid("empty series collection".into()))?;
    let c = first.channels();
    let mut lo = vec![f64::INFINITY; c];
    let mut hi = vec![f64::NEG_INFINITY; c];
    for s in series {
        if s.channels() != c {
            return Err(RasterError::BandMismatch { stats: c, series: s.channels() });
        }
        let [t, _, h, w] = s.dims();
        for tt in 0..t {
            for b in 0..c {
                let start = s.index(tt, b, 0, 0);
                for &v in &s.values()[start..start + h * w] {
                    if s.is_nodata(v) {
                        continue;
                    }
                    lo[b] = lo[b].min(v as f64);
                    hi[b] = hi[b].max(v as f64);
                }
            }
        }
    }
    for b in 0..c {
        if !lo[b].is_finite() {
            return Err(RasterError::AllNodataBand { band: b, name: first.band_names[b].clone() });
        }
    }
    Ok(NormStats { per_band_min: lo, per_band_max: hi })
}

/// `(v - min) / (max - min)` per band. Degenerate bands map to 0, nodata
/// cells are left untouched and values outside the stats range are not
/// clamped.
pub fn normalize_minmax(series: &RasterTimeSeries, stats: &NormStats) -> Result<RasterTimeSeries, RasterError> {
    if stats.bands() != series.channels() {
        return Err(RasterError::BandMismatch { stats: stats.bands(), series: series.channels() });
    }
    let mut out = series.clone();
    let [t, c, h, w] = series.dims();
    let nodata = series.nodata;
    for tt in 0..t {
        for b in 0..c {
            let (lo, hi) = (stats.per_band_min[b], stats.per_band_max[b]);
            let range = hi - lo;
            let start = series.index(tt, b, 0, 0);
            for v in &mut out.values_mut()[start..start + h * w] {
                if nodata == Some(*v) {
                    continue;
                }
                *v = if range > 0.0 { ((*v as f64 - lo) / range) as f32 } else { 0.0 };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f32>, nodata: Option<f32>) -> RasterTimeSeries {
        let n = values.len();
        RasterTimeSeries::new([1, 1, 1, n], values, vec!["b".into()], 1, 0, nodata).unwrap()
    }

    #[test]
    fn single_series_min_max() {
        let s = series(vec![0.0, 2.0, 1.0], None);
        let st = compute_norm_stats(&[&s]).unwrap();
        assert_eq!((st.per_band_min[0], st.per_band_max[0]), (0.0, 2.0));
    }

    #[test]
    fn stats_span_the_collection() {
        let a = series(vec![1.0, 3.0], None);
        let b = series(vec![0.0, 2.0], None);
        let st = compute_norm_stats(&[&a, &b]).unwrap();
        assert_eq!((st.per_band_min[0], st.per_band_max[0]), (0.0, 3.0));
    }

    #[test]
    fn all_nodata_band_errors() {
        let s = series(vec![-1.0, -1.0], Some(-1.0));
        assert!(matches!(compute_norm_stats(&[&s]), Err(RasterError::AllNodataBand { band: 0, .. })));
    }

    #[test]
    fn nodata_is_skipped_and_preserved() {
        let s = series(vec![-1.0, 4.0, 8.0], Some(-1.0));
        let st = compute_norm_stats(&[&s]).unwrap();
        assert_eq!(st.per_band_min[0], 4.0);
        let n = normalize_minmax(&s, &st).unwrap();
        assert_eq!(n.values(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn maps_endpoints_and_midpoint() {
        let s = series(vec![0.0, 1.0, 2.0], None);
        let st = NormStats { per_band_min: vec![0.0], per_band_max: vec![2.0] };
        assert_eq!(normalize_minmax(&s, &st).unwrap().values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_band_maps_to_zero() {
        let s = series(vec![7.0, 7.0, 3.0], None);
        let st = NormStats { per_band_min: vec![7.0], per_band_max: vec![7.0] };
        assert_eq!(normalize_minmax(&s, &st).unwrap().values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn out_of_range_values_are_not_clamped() {
        let s = series(vec![-2.0, 4.0], None);
        let st = NormStats { per_band_min: vec![0.0], per_band_max: vec![2.0] };
        assert_eq!(normalize_minmax(&s, &st).unwrap().values(), &[-1.0, 2.0]);
    }

    #[test]
    fn band_count_mismatch() {
        let s = series(vec![1.0], None);
        let st = NormStats { per_band_min: vec![0.0, 0.0], per_band_max: vec![1.0, 1.0] };
        assert!(matches!(normalize_minmax(&s, &st), Err(RasterError::BandMismatch { .. })));
    }
}
