use super::DataError;
use crate::stats;
use crate::Scalar;

/// Clamp bounds: the order statistics nearest to the interpolated
/// `proportion` and `1 - proportion` positions, `round((n-1)p)`.
///
/// Using order statistics (not interpolated values) makes winsorization
/// idempotent.
pub fn winsor_bounds<T: Scalar>(values: &[T], proportion: f64) -> Result<(T, T), DataError> {
    if values.is_empty() {
        return Err(DataError::EmptyInput);
    }
    if !(0.0..0.5).contains(&proportion) {
        return Err(DataError::Proportion(proportion));
    }
    let s = stats::sorted(values);
    let last = s.len() - 1;
    let lo = ((last as f64) * proportion).round() as usize;
    let hi = ((last as f64) * (1.0 - proportion)).round() as usize;
    Ok((s[lo.min(last)], s[hi.min(last)]))
}

/// Clamps `values` into their winsor bounds, preserving order.
pub fn winsorize<T: Scalar>(values: &[T], proportion: f64) -> Result<Vec<T>, DataError> {
    let (lo, hi) = winsor_bounds(values, proportion)?;
    Ok(values.iter().map(|&v| v.max(lo).min(hi)).collect())
}
