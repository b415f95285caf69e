//! LASSO by cyclic coordinate descent on the Gram matrix, with a
//! log-spaced penalty path and contiguous-block cross-validation.
//!
//! Objective on standardized columns `z_j` and centered `y`:
//! `(1/2n) ||y - Z b||^2 + lambda ||b||_1`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::BenchError;
use crate::linalg::solve;
use crate::Scalar;

/// Convergence threshold on the largest standardized coefficient change.
pub const LASSO_TOL: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 200_000;
/// Diagonal shift for feature-sign steps on a singular Gram block.
pub const SINGULAR_RIDGE: f64 = 1e-8;
/// A path stops descending once the fit explains this share of the
/// centered variance; smaller penalties reuse the last solution.
pub const SATURATION: f64 = 0.999;
pub const DEFAULT_LAMBDAS: usize = 100;
pub const DEFAULT_FOLDS: usize = 7;
/// The penalty path spans this many decades below `lambda_max`.
pub const PATH_DECADES: f64 = 4.0;

/// Fitted model on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit<T> {
    pub intercept: T,
    pub coefficients: Vec<T>,
    /// Penalty on the standardized scale.
    pub lambda: T,
    /// Coefficients on the standardized scale (zero for constant columns).
    pub standardized: Vec<T>,
}

impl<T: Scalar> LassoFit<T> {
    pub fn predict(&self, row: ArrayView1<T>) -> T {
        self.intercept + row.iter().zip(&self.coefficients).map(|(&x, &b)| x * b).sum::<T>()
    }
}

#[derive(Debug, Clone)]
pub struct LassoCv<T> {
    pub fit: LassoFit<T>,
    pub lambdas: Vec<T>,
    /// Mean squared held-out error per penalty.
    pub cv_mse: Vec<T>,
    pub best: usize,
}

/// Column means, population standard deviations, and the Gram system of
/// the standardized design.
#[derive(Debug, Clone)]
pub struct Standardized<T> {
    pub means: Vec<T>,
    /// Zero marks a constant column, excluded from the fit.
    pub scales: Vec<T>,
    pub y_mean: T,
    pub gram: Array2<T>,
    pub xty: Array1<T>,
    /// Centered `y'y / n`.
    pub yty: T,
}

impl<T: Scalar> Standardized<T> {
    pub fn new(x: ArrayView2<T>, y: ArrayView1<T>) -> Self {
        let (n, p) = x.dim();
        let nf = T::from_usize_lossy(n);
        let means: Vec<T> = x.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_else(|| vec![T::zero(); p]);
        let mut z = x.to_owned();
        let mut scales = vec![T::zero(); p];
        for (j, mut col) in z.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v - means[j]);
            let sd = (col.dot(&col) / nf).sqrt();
            // Relative threshold: a column that is constant up to rounding is constant.
            let mag = means[j].abs().max(T::one());
            if sd > T::lit(1e-12) * mag {
                scales[j] = sd;
                col.mapv_inplace(|v| v / sd);
            } else {
                col.fill(T::zero());
            }
        }
        let y_mean = y.mean().unwrap_or(T::zero());
        let yc = y.mapv(|v| v - y_mean);
        let gram = z.t().dot(&z) / nf;
        let xty = z.t().dot(&yc) / nf;
        let yty = yc.dot(&yc) / nf;
        Self { means, scales, y_mean, gram, xty, yty }
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.scales.len()).filter(|&j| self.scales[j] > T::zero())
    }

    /// Smallest penalty with an all-zero solution.
    pub fn lambda_max(&self) -> T {
        self.active().map(|j| self.xty[j].abs()).fold(T::zero(), T::max)
    }

    /// Maps standardized coefficients back to the original scale.
    pub fn unscale(&self, b: &[T], lambda: T) -> LassoFit<T> {
        let coefficients: Vec<T> =
            b.iter().zip(&self.scales).map(|(&bj, &s)| if s > T::zero() { bj / s } else { T::zero() }).collect();
        let intercept = self.y_mean - coefficients.iter().zip(&self.means).map(|(&c, &m)| c * m).sum::<T>();
        LassoFit { intercept, coefficients, lambda, standardized: b.to_vec() }
    }
}

#[inline]
fn soft_threshold<T: Scalar>(z: T, lambda: T) -> T {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        T::zero()
    }
}

/// Duality gap of the standardized problem given `c = X'y/n - G b`; a
/// certificate of how far `b` is from optimal in objective value.
pub fn duality_gap<T: Scalar>(sys: &Standardized<T>, lambda: T, b: &[T], c: &Array1<T>) -> T {
    let bxty: T = b.iter().zip(&sys.xty).map(|(&bj, &x)| bj * x).sum();
    let bc: T = b.iter().zip(c).map(|(&bj, &cj)| bj * cj).sum();
    let l1: T = b.iter().map(|v| v.abs()).sum();
    let ry = sys.yty - bxty;
    let rr = sys.yty - bxty - bc;
    let cmax = sys.active().map(|j| c[j].abs()).fold(T::zero(), T::max);
    let s = if cmax > lambda { lambda / cmax } else { T::one() };
    let half = T::lit(0.5);
    half * rr + lambda * l1 - (s * ry - half * s * s * rr)
}

/// Objective `b'Gb/2 - b'q + lambda |b|_1` up to the constant `y'y/2n`.
fn objective<T: Scalar>(sys: &Standardized<T>, lambda: T, b: &[T]) -> T {
    let bv = Array1::from(b.to_vec());
    T::lit(0.5) * bv.dot(&sys.gram.dot(&bv)) - bv.dot(&sys.xty) + lambda * b.iter().map(|v| v.abs()).sum::<T>()
}

/// One feature-sign step on the nonzero set: minimizes the objective with
/// the current signs held fixed, then walks from `b` toward that minimizer
/// and stops at the best of the sign-change points and the endpoint.
/// Returns `false` when no step direction can be computed.
fn sign_step<T: Scalar>(sys: &Standardized<T>, lambda: T, b: &mut [T], active: &[usize]) -> bool {
    let set: Vec<usize> = active.iter().copied().filter(|&j| b[j] != T::zero()).collect();
    if set.is_empty() {
        return true;
    }
    let k = set.len();
    let g = Array2::from_shape_fn((k, k), |(r, c)| sys.gram[[set[r], set[c]]]);
    let rhs = Array1::from_shape_fn(k, |r| sys.xty[set[r]] - lambda * b[set[r]].signum());
    // A singular block has flat directions; a tiny ridge turns them into
    // long steps that the line search cuts at the first sign change.
    let ridged = || {
        let mut g = g.clone();
        g.diag_mut().mapv_inplace(|v| v + T::lit(SINGULAR_RIDGE));
        solve(g.view(), rhs.view(), T::lit(1e-15))
    };
    let Some(target) = solve(g.view(), rhs.view(), T::lit(1e-12)).or_else(ridged) else {
        return false;
    };
    let mut stops = vec![T::one()];
    for (r, &j) in set.iter().enumerate() {
        if target[r].signum() != b[j].signum() {
            stops.push(b[j] / (b[j] - target[r]));
        }
    }
    let point = |t: T| -> Vec<T> {
        let mut out = b.to_vec();
        for (r, &j) in set.iter().enumerate() {
            out[j] = b[j] + t * (target[r] - b[j]);
        }
        out
    };
    let mut best = b.to_vec();
    let mut best_f = objective(sys, lambda, b);
    for t in stops {
        let mut cand = point(t);
        // Coefficients at or past their own sign change are exactly zero.
        for (r, &j) in set.iter().enumerate() {
            let crossing = target[r].signum() != b[j].signum() && t >= b[j] / (b[j] - target[r]);
            if crossing {
                cand[j] = T::zero();
            }
        }
        let f = objective(sys, lambda, &cand);
        if f < best_f {
            best_f = f;
            best = cand;
        }
    }
    b.copy_from_slice(&best);
    true
}

/// Coordinate descent from the warm start `b` at one penalty.
///
/// Full sweeps decide which coefficients are nonzero; between sweeps an
/// exact feature-sign step optimizes the nonzero set (falling back to
/// sweeps over that set if its Gram block is singular). Stops when a full
/// sweep changes no coefficient by more than [`LASSO_TOL`].
pub fn coordinate_descent<T: Scalar>(sys: &Standardized<T>, lambda: T, b: &mut [T]) -> Result<usize, BenchError> {
    let p = b.len();
    let tol = T::lit(LASSO_TOL);
    let active: Vec<usize> = sys.active().collect();
    let residual = |b: &[T]| -> Array1<T> {
        // c = X'y/n - G b
        let mut c = sys.xty.clone();
        for j in 0..p {
            if b[j] != T::zero() {
                c.scaled_add(-b[j], &sys.gram.column(j));
            }
        }
        c
    };
    let mut c = residual(b);
    let update = |j: usize, b: &mut [T], c: &mut Array1<T>| -> T {
        let g = sys.gram[[j, j]];
        let z = c[j] + g * b[j];
        let new = soft_threshold(z, lambda) / g;
        let delta = new - b[j];
        if delta != T::zero() {
            b[j] = new;
            c.scaled_add(-delta, &sys.gram.column(j));
        }
        delta.abs()
    };
    let mut sweeps = 0;
    loop {
        let mut max_change = T::zero();
        for &j in &active {
            max_change = max_change.max(update(j, b, &mut c));
        }
        sweeps += 1;
        if max_change < tol {
            return Ok(sweeps);
        }
        if sign_step(sys, lambda, b, &active) {
            c = residual(b);
        } else {
            let nonzero: Vec<usize> = active.iter().copied().filter(|&j| b[j] != T::zero()).collect();
            loop {
                let mut inner = T::zero();
                for &j in &nonzero {
                    inner = inner.max(update(j, b, &mut c));
                }
                sweeps += 1;
                if inner < tol || sweeps >= MAX_SWEEPS {
                    break;
                }
            }
        }
        if sweeps >= MAX_SWEEPS {
            return Err(BenchError::NonConvergence(format!("lasso at lambda {} after {sweeps} sweeps", lambda.as_f64())));
        }
    }
}

/// `n` penalties log-spaced from `lambda_max` down [`PATH_DECADES`] decades.
pub fn lambda_grid<T: Scalar>(lambda_max: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lambda_max];
    }
    (0..n)
        .map(|i| lambda_max * T::lit(10f64.powf(-PATH_DECADES * i as f64 / (n - 1) as f64)))
        .collect()
}

/// LASSO at one standardized-scale penalty.
pub fn lasso_fit<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, lambda: T) -> Result<LassoFit<T>, BenchError> {
    check_shape(x, y, 2)?;
    let sys = Standardized::new(x, y);
    if sys.active().next().is_none() {
        return Err(BenchError::RankZero);
    }
    let mut b = vec![T::zero(); x.ncols()];
    coordinate_descent(&sys, lambda, &mut b)?;
    Ok(sys.unscale(&b, lambda))
}

fn check_shape<T>(x: ArrayView2<T>, y: ArrayView1<T>, min_rows: usize) -> Result<(), BenchError> {
    if x.nrows() != y.len() {
        return Err(BenchError::Shape(format!("{} design rows vs {} targets", x.nrows(), y.len())));
    }
    if x.nrows() < min_rows {
        return Err(BenchError::TooFewRows { rows: x.nrows(), needed: min_rows });
    }
    Ok(())
}

/// Share of the centered variance explained by standardized coefficients.
fn explained<T: Scalar>(sys: &Standardized<T>, b: &[T]) -> T {
    if sys.yty <= T::zero() {
        return T::one();
    }
    let bv = Array1::from(b.to_vec());
    let rr = sys.yty - T::lit(2.0) * bv.dot(&sys.xty) + bv.dot(&sys.gram.dot(&bv));
    T::one() - rr / sys.yty
}

/// Warm-started path; returns standardized coefficients per penalty.
///
/// The path is truncated once the fit saturates (see [`SATURATION`]) or when
/// a penalty after the first fails to converge; the remaining penalties get
/// the last converged solution.
fn path<T: Scalar>(sys: &Standardized<T>, lambdas: &[T]) -> Result<Vec<Vec<T>>, BenchError> {
    let mut b = vec![T::zero(); sys.scales.len()];
    let mut out: Vec<Vec<T>> = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let mut trial = b.clone();
        match coordinate_descent(sys, l, &mut trial) {
            Ok(_) => b = trial,
            Err(BenchError::NonConvergence(msg)) if !out.is_empty() => {
                log::warn!("{msg}; path truncated");
                break;
            }
            Err(e) => return Err(e),
        }
        out.push(b.clone());
        if explained(sys, &b) >= T::lit(SATURATION) {
            break;
        }
    }
    out.resize(lambdas.len(), b);
    Ok(out)
}

/// Penalty chosen by `folds`-fold cross-validation over a path of
/// `n_lambdas` values, then refit on all rows. Folds are contiguous row
/// blocks; ties in held-out error go to the larger penalty.
pub fn lear_fit<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, n_lambdas: usize, folds: usize) -> Result<LassoCv<T>, BenchError> {
    check_shape(x, y, 2 * folds.max(1))?;
    let n = x.nrows();
    let full = Standardized::new(x, y);
    if full.active().next().is_none() {
        return Err(BenchError::RankZero);
    }
    let lmax = full.lambda_max();
    if lmax == T::zero() {
        // Constant target: every penalty gives the intercept-only model.
        let fit = full.unscale(&vec![T::zero(); x.ncols()], T::zero());
        return Ok(LassoCv { fit, lambdas: vec![T::zero()], cv_mse: vec![T::zero()], best: 0 });
    }
    let lambdas = lambda_grid(lmax, n_lambdas.max(1));
    let mut sse = vec![T::zero(); lambdas.len()];
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        let held: Vec<usize> = (lo..hi).collect();
        let xt = x.select(Axis(0), &train);
        let yt = y.select(Axis(0), &train);
        let sys = Standardized::new(xt.view(), yt.view());
        let coefs = path(&sys, &lambdas)?;
        for (k, b) in coefs.iter().enumerate() {
            let fit = sys.unscale(b, lambdas[k]);
            for &i in &held {
                let e = y[i] - fit.predict(x.row(i));
                sse[k] += e * e;
            }
        }
    }
    let nf = T::from_usize_lossy(n);
    let cv_mse: Vec<T> = sse.iter().map(|&s| s / nf).collect();
    let best = (0..cv_mse.len()).fold(0, |b, k| if cv_mse[k] < cv_mse[b] { k } else { b });
    let coefs = path(&full, &lambdas[..=best])?;
    let fit = full.unscale(coefs.last().expect("non-empty path"), lambdas[best]);
    Ok(LassoCv { fit, lambdas, cv_mse, best })
}
