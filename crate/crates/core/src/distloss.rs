//! Training objective: binary cross-entropy averaged over rows and levels,
//! plus an unnormalized ReLU penalty on decreasing adjacent CDF outputs.
//!
//! ```text
//! L = -(1/T) sum_t (1/k) sum_j [ y_tj log g_tj + (1 - y_tj) log(1 - g_tj) ]
//!     + lambda_m sum_t sum_{j<k} max(g_tj - g_t,j+1, 0)
//! ```

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::Scalar;

/// Predictions are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("shape mismatch: predictions {preds:?} vs targets {targets:?}")]
    Shape { preds: (usize, usize), targets: (usize, usize) },
    #[error("need at least 2 probability levels, got {0}")]
    TooFewLevels(usize),
    #[error("target at ({row}, {col}) is {value}, expected 0 or 1")]
    NonBinaryTarget { row: usize, col: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub bce: T,
    pub penalty: T,
    pub total: T,
    pub lambda_m: T,
}

fn check<T: Scalar>(preds: &ArrayView2<T>, targets: &ArrayView2<T>) -> Result<(), LossError> {
    if preds.dim() != targets.dim() {
        return Err(LossError::Shape { preds: preds.dim(), targets: targets.dim() });
    }
    if preds.ncols() < 2 {
        return Err(LossError::TooFewLevels(preds.ncols()));
    }
    for ((row, col), &y) in targets.indexed_iter() {
        if y != T::zero() && y != T::one() {
            return Err(LossError::NonBinaryTarget { row, col, value: y.as_f64() });
        }
    }
    Ok(())
}

#[inline]
fn clamp_prob<T: Scalar>(g: T) -> T {
    let eps = T::lit(PROB_EPS);
    g.max(eps).min(T::one() - eps)
}

pub fn bce_monotone_loss<T: Scalar>(
    preds: ArrayView2<T>,
    targets: ArrayView2<T>,
    lambda_m: T,
) -> Result<LossBreakdown<T>, LossError> {
    check(&preds, &targets)?;
    let (rows, k) = preds.dim();
    let mut bce = T::zero();
    let mut raw_penalty = T::zero();
    for (g_row, y_row) in preds.outer_iter().zip(targets.outer_iter()) {
        let mut row_sum = T::zero();
        for (&g, &y) in g_row.iter().zip(y_row.iter()) {
            let g = clamp_prob(g);
            row_sum += if y == T::one() { g.ln() } else { (T::one() - g).ln() };
        }
        bce += row_sum;
        for j in 0..k - 1 {
            raw_penalty += (g_row[j] - g_row[j + 1]).max(T::zero());
        }
    }
    let bce = -bce / (T::from_usize_lossy(rows) * T::from_usize_lossy(k));
    let penalty = lambda_m * raw_penalty;
    Ok(LossBreakdown { bce, penalty, total: bce + penalty, lambda_m })
}

/// Gradient of the loss with respect to the predictions.
///
/// The BCE part uses the clamped probability in `(g - y) / (T k g (1 - g))`.
/// The penalty contributes `+lambda_m` to `g_j` and `-lambda_m` to `g_{j+1}`
/// for every strictly decreasing pair; ties contribute nothing.
pub fn loss_gradient<T: Scalar>(
    preds: ArrayView2<T>,
    targets: ArrayView2<T>,
    lambda_m: T,
) -> Result<Array2<T>, LossError> {
    check(&preds, &targets)?;
    let (rows, k) = preds.dim();
    let norm = T::from_usize_lossy(rows) * T::from_usize_lossy(k);
    let mut grad = Array2::zeros((rows, k));
    for ((mut g_out, g_row), y_row) in grad.outer_iter_mut().zip(preds.outer_iter()).zip(targets.outer_iter()) {
        for j in 0..k {
            let g = clamp_prob(g_row[j]);
            g_out[j] = (g - y_row[j]) / (norm * g * (T::one() - g));
        }
        for j in 0..k - 1 {
            if g_row[j] > g_row[j + 1] {
                g_out[j] += lambda_m;
                g_out[j + 1] -= lambda_m;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_half_predictions_give_log_two() {
        let preds = Array2::from_elem((3, 5), 0.5);
        let targets = array![[1., 1., 0., 0., 1.], [0., 0., 0., 0., 0.], [1., 1., 1., 1., 1.]];
        let l = bce_monotone_loss(preds.view(), targets.view(), 7.0).unwrap();
        assert!((l.bce - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(l.penalty, 0.0);
        assert_eq!(l.total, l.bce);
    }

    #[test]
    fn penalty_hand_case() {
        let preds: Array2<f64> = array![[0.2, 0.1, 0.3]];
        let targets = array![[0., 0., 1.]];
        let l = bce_monotone_loss(preds.view(), targets.view(), 1.5).unwrap();
        assert!((l.penalty - 0.15).abs() < 1e-15);
    }

    #[test]
    fn near_perfect_predictions_have_tiny_loss() {
        let targets = array![[0., 0., 1., 1.], [0., 1., 1., 1.]];
        let preds = targets.mapv(|y: f64| if y == 1.0 { 1.0 } else { 0.0 });
        let l = bce_monotone_loss(preds.view(), targets.view(), 1.5).unwrap();
        assert!(l.bce < 2e-7, "{}", l.bce);
        assert_eq!(l.penalty, 0.0);
    }

    #[test]
    fn errors_on_bad_input() {
        let p = Array2::from_elem((2, 3), 0.5);
        let t = Array2::from_elem((2, 4), 0.0);
        assert!(matches!(bce_monotone_loss(p.view(), t.view(), 1.0), Err(LossError::Shape { .. })));
        let t = array![[0.0, 0.5, 1.0], [0.0, 0.0, 0.0]];
        assert!(matches!(
            loss_gradient(p.view(), t.view(), 1.0),
            Err(LossError::NonBinaryTarget { row: 0, col: 1, .. })
        ));
        let p1 = Array2::from_elem((2, 1), 0.5);
        assert_eq!(
            bce_monotone_loss(p1.view(), p1.view(), 1.0).unwrap_err(),
            LossError::TooFewLevels(1)
        );
    }

    #[test]
    fn monotone_rows_and_ties_have_no_penalty_gradient() {
        let preds = array![[0.1, 0.3, 0.3, 0.8]];
        let targets = array![[0., 0., 1., 1.]];
        let with = loss_gradient(preds.view(), targets.view(), 2.0).unwrap();
        let without = loss_gradient(preds.view(), targets.view(), 0.0).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let preds: Array2<f64> = Array2::from_shape_fn((4, 5), |_| rng.random_range(0.05..0.95));
            let targets = Array2::from_shape_fn((4, 5), |_| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
            // Stay away from ReLU kinks where central differences are meaningless.
            let min_gap = preds
                .outer_iter()
                .flat_map(|r| (0..4).map(move |j| (r[j] - r[j + 1]).abs()).collect::<Vec<_>>())
                .fold(f64::INFINITY, f64::min);
            if min_gap < 1e-3 {
                continue;
            }
            let grad = loss_gradient(preds.view(), targets.view(), 1.5).unwrap();
            let h = 1e-6;
            for idx in 0..20 {
                let (r, c) = (idx / 5, idx % 5);
                let mut up = preds.clone();
                up[[r, c]] += h;
                let mut dn = preds.clone();
                dn[[r, c]] -= h;
                let fu = bce_monotone_loss(up.view(), targets.view(), 1.5).unwrap().total;
                let fd = bce_monotone_loss(dn.view(), targets.view(), 1.5).unwrap().total;
                let numeric = (fu - fd) / (2.0 * h);
                assert!((numeric - grad[[r, c]]).abs() < 1e-6, "{numeric} vs {}", grad[[r, c]]);
            }
        }
    }

    proptest! {
        #[test]
        fn penalty_scales_linearly_and_vanishes_on_sorted_rows(
            raw in proptest::collection::vec(0.01f64..0.99, 12),
            c in 0.0f64..10.0,
        ) {
            let preds = Array2::from_shape_vec((3, 4), raw).unwrap();
            let targets = Array2::<f64>::zeros((3, 4));
            let a = bce_monotone_loss(preds.view(), targets.view(), 1.0).unwrap();
            let b = bce_monotone_loss(preds.view(), targets.view(), c).unwrap();
            prop_assert!((b.penalty - c * a.penalty).abs() <= 1e-12 * (1.0 + b.penalty));

            let mut sorted = preds.clone();
            for mut row in sorted.outer_iter_mut() {
                let mut v = row.to_vec();
                v.sort_by(|x, y| x.partial_cmp(y).unwrap());
                row.assign(&ndarray::Array1::from(v));
            }
            let s = bce_monotone_loss(sorted.view(), targets.view(), c).unwrap();
            prop_assert_eq!(s.penalty, 0.0);
        }

        #[test]
        fn row_permutation_invariance(raw in proptest::collection::vec(0.01f64..0.99, 12), bits in proptest::collection::vec(any::<bool>(), 12)) {
            let preds = Array2::from_shape_vec((4, 3), raw).unwrap();
            let targets = Array2::from_shape_vec((4, 3), bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).unwrap();
            let order = [2usize, 0, 3, 1];
            let pp = preds.select(ndarray::Axis(0), &order);
            let tp = targets.select(ndarray::Axis(0), &order);
            let a = bce_monotone_loss(preds.view(), targets.view(), 1.5).unwrap();
            let b = bce_monotone_loss(pp.view(), tp.view(), 1.5).unwrap();
            prop_assert!((a.total - b.total).abs() < 1e-12);
        }
    }
}
