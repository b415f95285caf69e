use super::{CdfError, MonotoneCubic};
use crate::transform::TransformState;
use crate::Scalar;

/// Grid size for CDF inversion.
pub const DEFAULT_GRID_POINTS: usize = 400;
/// Minimum gap between consecutive repaired probabilities and the 0/1 anchors.
pub const REPAIR_SPACING: f64 = 1e-6;

/// Maps raw network probabilities to a strictly increasing sequence inside
/// `(0, 1)`: clamp, running maximum, then a forward pass pushing each value at
/// least [`REPAIR_SPACING`] above its predecessor (starting from 0) and a
/// backward pass pulling each value at least that far below its successor
/// (ending at 1).
pub fn repair_probabilities<T: Scalar>(raw: &[T]) -> Result<Vec<T>, CdfError> {
    if raw.iter().any(|p| !p.is_finite()) {
        return Err(CdfError::NonFinite("raw probabilities"));
    }
    let gap = T::lit(REPAIR_SPACING);
    let mut out = Vec::with_capacity(raw.len());
    let mut run = T::zero();
    for &p in raw {
        run = run.max(p.max(T::zero()).min(T::one()));
        out.push(run);
    }
    let mut prev = T::zero();
    for p in out.iter_mut() {
        *p = p.max(prev + gap);
        prev = *p;
    }
    let mut next = T::one();
    for p in out.iter_mut().rev() {
        *p = p.min(next - gap);
        next = *p;
    }
    Ok(out)
}

/// A fitted predictive CDF on `[low, high]`.
#[derive(Debug, Clone)]
pub struct CdfCurve<T> {
    curve: MonotoneCubic<T>,
    low: T,
    high: T,
}

impl<T: Scalar> CdfCurve<T> {
    /// Repairs `raw`, collapses tied support points (keeping the larger
    /// probability), adds `(low, 0)` and `(high, 1)`, and fits the monotone
    /// cubic. Anchors equal to a support endpoint are moved just outside it.
    pub fn fit(raw: &[T], support: &[T], anchors: (T, T)) -> Result<Self, CdfError> {
        if raw.len() != support.len() {
            return Err(CdfError::Length { what: "raw probabilities", got: raw.len(), expected: support.len() });
        }
        if support.is_empty() {
            return Err(CdfError::TooFewKnots(0));
        }
        if support.iter().any(|v| !v.is_finite()) || !anchors.0.is_finite() || !anchors.1.is_finite() {
            return Err(CdfError::NonFinite("support"));
        }
        for i in 1..support.len() {
            if support[i] < support[i - 1] {
                return Err(CdfError::NonIncreasingKnots { what: "support", index: i });
            }
        }
        let probs = repair_probabilities(raw)?;
        let mut xs: Vec<T> = Vec::with_capacity(support.len() + 2);
        let mut ys: Vec<T> = Vec::with_capacity(support.len() + 2);
        for (&x, &p) in support.iter().zip(&probs) {
            if xs.last() == Some(&x) {
                *ys.last_mut().expect("paired with xs") = p;
            } else {
                xs.push(x);
                ys.push(p);
            }
        }
        let lo_s = xs[0];
        let hi_s = xs[xs.len() - 1];
        let nudge = |v: T| T::lit(1e-9) * v.abs().max(T::one());
        let (mut low, mut high) = anchors;
        if low > lo_s {
            return Err(CdfError::AnchorInsideSupport { anchor: low.as_f64(), lo: lo_s.as_f64(), hi: hi_s.as_f64() });
        }
        if high < hi_s {
            return Err(CdfError::AnchorInsideSupport { anchor: high.as_f64(), lo: lo_s.as_f64(), hi: hi_s.as_f64() });
        }
        if low == lo_s {
            low = lo_s - nudge(lo_s);
        }
        if high == hi_s {
            high = hi_s + nudge(hi_s);
        }
        xs.insert(0, low);
        ys.insert(0, T::zero());
        xs.push(high);
        ys.push(T::one());
        Ok(Self { curve: MonotoneCubic::new(&xs, &ys)?, low, high })
    }

    pub fn cdf(&self, x: T) -> T {
        self.curve.eval(x)
    }

    pub fn bounds(&self) -> (T, T) {
        (self.low, self.high)
    }

    /// Grid abscissae: every knot interval gets one cell plus a share of the
    /// remaining cells proportional to its probability mass (largest
    /// remainder, ties to the lower interval); cells are uniform within an
    /// interval. Falls back to a uniform grid when `grid_n` cannot cover
    /// every interval.
    pub fn grid(&self, grid_n: usize) -> Vec<T> {
        let grid_n = grid_n.max(2);
        let (kx, ky) = self.curve.knots();
        let intervals = kx.len() - 1;
        if grid_n - 1 < intervals {
            let span = self.high - self.low;
            let last = T::from_usize_lossy(grid_n - 1);
            return (0..grid_n).map(|i| self.low + span * T::from_usize_lossy(i) / last).collect();
        }
        let extra = grid_n - 1 - intervals;
        let quotas: Vec<f64> = (0..intervals).map(|k| (ky[k + 1] - ky[k]).as_f64() * extra as f64).collect();
        let mut cells: Vec<usize> = quotas.iter().map(|q| 1 + q.floor() as usize).collect();
        let mut left = grid_n - 1 - cells.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..intervals).collect();
        order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            cells[k] += 1;
            left -= 1;
        }
        let mut xs = Vec::with_capacity(grid_n);
        xs.push(kx[0]);
        for k in 0..intervals {
            let h = kx[k + 1] - kx[k];
            let c = T::from_usize_lossy(cells[k]);
            for i in 1..cells[k] {
                xs.push(kx[k] + h * T::from_usize_lossy(i) / c);
            }
            xs.push(kx[k + 1]);
        }
        xs
    }

    /// Quantiles by linear interpolation between `grid_n` samples of the CDF.
    pub fn quantiles(&self, levels: &[T], grid_n: usize) -> Result<Vec<T>, CdfError> {
        let xs = self.grid(grid_n);
        let grid_n = xs.len();
        let mut fs: Vec<T> = xs.iter().map(|&x| self.curve.eval(x)).collect();
        for i in 1..grid_n {
            fs[i] = fs[i].max(fs[i - 1]);
        }
        let mut out = levels
            .iter()
            .map(|&a| {
                if !(a > T::zero() && a < T::one()) {
                    return Err(CdfError::BadLevel { level: a.as_f64() });
                }
                let i = fs.partition_point(|&f| f < a).clamp(1, grid_n - 1);
                let (f0, f1) = (fs[i - 1], fs[i]);
                let w = if f1 > f0 { (a - f0) / (f1 - f0) } else { T::zero() };
                Ok(xs[i - 1] + w * (xs[i] - xs[i - 1]))
            })
            .collect::<Result<Vec<T>, CdfError>>()?;
        // Guards against one-ulp overshoot at cell boundaries.
        for i in 1..out.len() {
            if levels[i] >= levels[i - 1] {
                out[i] = out[i].max(out[i - 1]);
            }
        }
        Ok(out)
    }
}

/// Repaired raw CDF on `support` inverted to quantiles at `levels`.
pub fn cdf_to_quantiles<T: Scalar>(
    raw: &[T],
    support: &[T],
    anchors: (T, T),
    grid_n: usize,
    levels: &[T],
) -> Result<Vec<T>, CdfError> {
    CdfCurve::fit(raw, support, anchors)?.quantiles(levels, grid_n)
}

/// [`cdf_to_quantiles`] carried out in transformed space: support and
/// anchors are given in prices, quantiles are returned in prices.
pub fn cdf_to_price_quantiles<T: Scalar>(
    raw: &[T],
    support_prices: &[T],
    anchor_prices: (T, T),
    state: &TransformState<T>,
    grid_n: usize,
    levels: &[T],
) -> Result<Vec<T>, CdfError> {
    let support = state.forward_all(support_prices);
    let anchors = (state.forward(anchor_prices.0), state.forward(anchor_prices.1));
    let q = cdf_to_quantiles(raw, &support, anchors, grid_n, levels)?;
    Ok(state.inverse_all(&q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdftools::{forecast_levels, target_levels};
    use proptest::prelude::*;

    #[test]
    fn repair_of_flat_half() {
        let r = repair_probabilities(&[0.5; 31]).unwrap();
        assert!(r.windows(2).all(|w| w[1] - w[0] >= REPAIR_SPACING * (1.0 - 1e-9)));
        assert!(r[0] > 0.0 && r[30] < 1.0);
        assert_eq!(r[0], 0.5);
    }

    #[test]
    fn repair_near_the_ends() {
        let r = repair_probabilities(&[0.0, 0.0, 1.0, 1.0, 0.9]).unwrap();
        assert!(r[0] > 0.0 && r[4] < 1.0);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identity_uniform() {
        let l = target_levels();
        let q = cdf_to_quantiles(&l, &l, (0.0, 1.0), DEFAULT_GRID_POINTS, &[0.25]).unwrap();
        assert!((q[0] - 0.25).abs() <= 2.5e-3, "{}", q[0]);
    }

    #[test]
    fn self_inversion_reproduces_support() {
        let l = target_levels();
        let support: Vec<f64> = l.iter().map(|a| 40.0 + 25.0 * (a - 0.5) + 30.0 * (a - 0.5).powi(3)).collect();
        let anchors = (20.0, 70.0);
        let q = cdf_to_quantiles(&l, &support, anchors, DEFAULT_GRID_POINTS, &l).unwrap();
        let res = (anchors.1 - anchors.0) / (DEFAULT_GRID_POINTS - 1) as f64;
        for (a, b) in q.iter().zip(&support) {
            assert!((a - b).abs() <= res, "{a} vs {b}");
        }
    }

    #[test]
    fn grid_has_requested_size_and_contains_knots() {
        let l = target_levels();
        let s: Vec<f64> = (0..31).map(|i| (i as f64).powi(2) / 10.0).collect();
        let c = CdfCurve::fit(&l, &s, (-5.0, 100.0)).unwrap();
        let g = c.grid(DEFAULT_GRID_POINTS);
        assert_eq!(g.len(), DEFAULT_GRID_POINTS);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(s.iter().all(|k| g.contains(k)));
        assert_eq!(c.grid(10).len(), 10);
    }

    #[test]
    fn anchors_inside_support_are_rejected() {
        let l = target_levels();
        let s: Vec<f64> = (0..31).map(f64::from).collect();
        assert!(matches!(
            cdf_to_quantiles(&l, &s, (1.0, 40.0), 400, &[0.5]),
            Err(CdfError::AnchorInsideSupport { .. })
        ));
        assert!(cdf_to_quantiles(&l, &s, (0.0, 30.0), 400, &[0.5]).is_ok());
    }

    #[test]
    fn tied_support_collapses() {
        let l = target_levels();
        let s = vec![5.0; 31];
        let q = cdf_to_quantiles(&l, &s, (4.0, 6.0), 400, &forecast_levels()).unwrap();
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
        assert!(q.iter().all(|&v| (4.0..=6.0).contains(&v)));
    }

    #[test]
    fn price_space_inversion_commutes_with_transform() {
        let st = TransformState { median: 45.0, mad_scaled: 12.0 };
        let l = target_levels();
        let support: Vec<f64> = l.iter().map(|a| 45.0 + 30.0 * (a - 0.5)).collect();
        let q = cdf_to_price_quantiles(&l, &support, (20.0, 80.0), &st, 400, &forecast_levels()).unwrap();
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
        assert!((q[49] - 45.0).abs() < 0.2);
    }

    proptest! {
        #[test]
        fn inversion_is_consistent(raw in proptest::collection::vec(0f64..1.0, 31), gaps in proptest::collection::vec(0f64..3.0, 31)) {
            let mut support = Vec::with_capacity(31);
            let mut acc = 0.0;
            for g in gaps { acc += g; support.push(acc); }
            let curve = CdfCurve::fit(&raw, &support, (-1.0, acc + 1.0)).unwrap();
            let levels = forecast_levels();
            let q = curve.quantiles(&levels, DEFAULT_GRID_POINTS).unwrap();
            prop_assert!(q.windows(2).all(|w| w[0] <= w[1]));
            for (a, x) in levels.iter().zip(&q) {
                prop_assert!((curve.cdf(*x) - a).abs() <= 2.0 / DEFAULT_GRID_POINTS as f64);
            }
        }
    }
}
