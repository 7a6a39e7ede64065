//! Upper order statistics used by every resampling critical value.

use crate::error::{Error, Result};

/// One-based rank `floor((1 - alpha) n) + 1`, capped at `n`.
pub fn order_statistic_rank(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) || n == 0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    // the nudge keeps exact products such as 0.95 * 500 from rounding down
    let rank = ((1.0 - alpha) * n as f64 + 1e-9).floor() as usize + 1;
    Ok(rank.min(n))
}

/// The `order_statistic_rank(values.len(), alpha)`-th smallest value.
///
/// Reorders `values` in place.
pub fn upper_order_statistic(values: &mut [f64], alpha: f64) -> Result<f64> {
    let rank = order_statistic_rank(values.len(), alpha)?;
    let (_, v, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*v)
}
