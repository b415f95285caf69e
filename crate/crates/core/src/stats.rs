//! Order statistics and normal-distribution helpers.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::Scalar;

/// Sorts a copy of `values` ascending. NaNs sort last.
pub fn sorted<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Greater));
    v
}

/// Interpolated order statistic of an ascending slice: position `(n-1)·alpha`,
/// linear interpolation between the two closest ranks.
///
/// Panics on an empty slice.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], alpha: T) -> T {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = alpha.max(T::zero()).min(T::one()) * T::from_usize_lossy(n - 1);
    let lo = pos.floor();
    let i = lo.to_usize().unwrap_or(0).min(n - 1);
    let frac = pos - lo;
    if i + 1 >= n || frac == T::zero() {
        return sorted[i];
    }
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Interpolated quantiles at several levels from an unsorted sample.
pub fn quantiles<T: Scalar>(values: &[T], levels: &[T]) -> Vec<T> {
    let s = sorted(values);
    levels.iter().map(|&a| quantile_sorted(&s, a)).collect()
}

pub fn median<T: Scalar>(values: &[T]) -> T {
    quantile_sorted(&sorted(values), T::lit(0.5))
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len())
}

/// Sample standard deviation with the `n - 1` denominator. Zero for `n < 2`.
pub fn sample_sd<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(values);
    let ss: T = values.iter().map(|&v| (v - m) * (v - m)).sum();
    (ss / T::from_usize_lossy(n - 1)).sqrt()
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}
