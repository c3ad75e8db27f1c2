use super::{RasterError, RasterTimeSeries};

/// Number of timestamps available after `months` of a year.
///
/// A timestamp covers `[origin + t·step, origin + (t+1)·step)` days and is
/// available once its window has closed: it is kept iff
/// `origin + (t+1)·step <= months · 365/12`. A month is 365/12 days; the
/// comparison is done in integers (`12·day <= 365·months`) so twelve months
/// always keep a full 365-day year.
pub fn months_horizon_len(total: usize, step_days: u32, origin_day: u32, months: u32) -> usize {
    (0..total)
        .take_while(|&t| 12 * (origin_day as u64 + (t as u64 + 1) * step_days as u64) <= 365 * months as u64)
        .count()
}

/// Keeps the leading timestamps that fall inside the first `months` months.
pub fn truncate_months(series: &RasterTimeSeries, months: u32) -> Result<RasterTimeSeries, RasterError> {
    if !(1..=12).contains(&months) {
        return Err(RasterError::Months(months));
    }
    let keep = months_horizon_len(series.timestamps(), series.step_days, series.origin_day, months);
    if keep == 0 {
        return Err(RasterError::EmptyTruncation { months, step_days: series.step_days });
    }
    Ok(series.head(keep))
}
