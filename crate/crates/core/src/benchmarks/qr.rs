//! Linear quantile regression solved exactly by descent along the edges of
//! the check-loss polytope.
//!
//! An iteratively reweighted least-squares pass gives a warm start; the
//! nearest vertex (p rows with zero residual) is then improved edge by edge
//! until no direction decreases the objective. Among optimal vertices the
//! lexicographically smallest coefficient vector is returned, which makes
//! the result unique. For an intercept-only design that is the order
//! statistic `y_(ceil(n alpha))`.

use std::cmp::Ordering;
use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::BenchError;
use crate::linalg::{independent_columns, null_vector, solve};
use crate::Scalar;

pub const MAX_EDGE_STEPS: usize = 10_000;
/// Largest number of candidate edge sets examined at one vertex.
pub const MAX_EDGE_SETS: usize = 20_000;
/// Residuals below this multiple of `max(1, max |y|)` count as zero.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Directional derivatives below this multiple of their scale count as zero.
pub const SLOPE_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;
const IRLS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QrFit<T> {
    /// One coefficient per design column; dependent columns get zero.
    pub coefficients: Vec<T>,
    pub objective: T,
    pub edge_steps: usize,
}

impl<T: Scalar> QrFit<T> {
    pub fn predict(&self, row: ArrayView1<T>) -> T {
        row.iter().zip(&self.coefficients).map(|(&x, &b)| x * b).sum()
    }
}

#[inline]
fn check<T: Scalar>(r: T, alpha: T) -> T {
    if r < T::zero() {
        (alpha - T::one()) * r
    } else {
        alpha * r
    }
}

/// Check-loss objective `sum_i rho_alpha(y_i - x_i b)`.
pub fn check_loss<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, coefficients: &[T], alpha: T) -> T {
    let b = ArrayView1::from(coefficients);
    x.outer_iter().zip(y).map(|(row, &yi)| check(yi - row.dot(&b), alpha)).sum()
}

/// Identical rows merged into weights, first-occurrence order.
struct Merged<T> {
    x: Array2<T>,
    y: Array1<T>,
    w: Array1<T>,
}

fn merge<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>) -> Merged<T> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut rows: Vec<usize> = Vec::new();
    let mut w: Vec<T> = Vec::new();
    for (i, row) in x.outer_iter().enumerate() {
        let key: Vec<u64> = row.iter().chain(std::iter::once(&y[i])).map(|v| v.as_f64().to_bits()).collect();
        match index.get(&key) {
            Some(&k) => w[k] += T::one(),
            None => {
                index.insert(key, rows.len());
                rows.push(i);
                w.push(T::one());
            }
        }
    }
    Merged { x: x.select(Axis(0), &rows), y: y.select(Axis(0), &rows), w: Array1::from(w) }
}

/// Weighted least squares; `None` when the normal equations are singular.
fn weighted_ls<T: Scalar>(x: &Array2<T>, y: &Array1<T>, w: &Array1<T>) -> Option<Array1<T>> {
    let p = x.ncols();
    let mut a = Array2::zeros((p, p));
    let mut b = Array1::zeros(p);
    for ((row, &yi), &wi) in x.outer_iter().zip(y).zip(w) {
        for j in 0..p {
            let v = wi * row[j];
            b[j] += v * yi;
            for k in 0..p {
                a[[j, k]] += v * row[k];
            }
        }
    }
    solve(a.view(), b.view(), T::lit(1e-14))
}

fn irls_start<T: Scalar>(m: &Merged<T>, alpha: T, scale: T) -> Array1<T> {
    let mut beta = match weighted_ls(&m.x, &m.y, &m.w) {
        Some(b) => b,
        None => return Array1::zeros(m.x.ncols()),
    };
    let floor = T::lit(IRLS_FLOOR);
    let mut eps = scale;
    while eps >= floor {
        for _ in 0..2 {
            let r = &m.y - &m.x.dot(&beta);
            let w = Array1::from_shape_fn(r.len(), |i| {
                let side = if r[i] > T::zero() { alpha } else { T::one() - alpha };
                m.w[i] * side / r[i].abs().max(eps)
            });
            match weighted_ls(&m.x, &m.y, &w) {
                Some(b) if b.iter().all(|v| v.is_finite()) => beta = b,
                _ => return beta,
            }
        }
        eps = eps * T::lit(0.1);
    }
    beta
}

/// Picks `p` linearly independent rows in the given preference order.
fn independent_rows<T: Scalar>(x: &Array2<T>, order: &[usize]) -> Vec<usize> {
    let p = x.ncols();
    let mut basis: Vec<Array1<T>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(p);
    for &i in order {
        if chosen.len() == p {
            break;
        }
        let row = x.row(i);
        let norm0 = row.dot(&row).sqrt();
        if norm0 == T::zero() {
            continue;
        }
        let mut v = row.to_owned();
        for q in &basis {
            let proj = q.dot(&v);
            v.scaled_add(-proj, q);
        }
        let norm = v.dot(&v).sqrt();
        if norm > T::lit(RANK_TOL) * norm0 {
            basis.push(v / norm);
            chosen.push(i);
        }
    }
    chosen
}

fn solve_basis<T: Scalar>(m: &Merged<T>, rows: &[usize]) -> Option<Array1<T>> {
    let a = m.x.select(Axis(0), rows);
    let b = m.y.select(Axis(0), rows);
    solve(a.view(), b.view(), T::lit(1e-13))
}

/// Calls `f` on every `k`-subset of `items` in lexicographic order.
fn for_each_subset(items: &[usize], k: usize, mut f: impl FnMut(&[usize])) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0usize; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        f(&buf);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] != pos + n - k {
                break;
            }
            if pos == 0 {
                return;
            }
        }
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

struct Edge<T> {
    dir: Array1<T>,
    subset: Vec<usize>,
    slope: T,
}

fn lex_negative<T: Scalar>(d: &Array1<T>) -> bool {
    d.iter().find(|v| v.abs() > T::lit(1e-12)).is_some_and(|&v| v < T::zero())
}

/// Exact quantile regression of `y` on the columns of `x` at level `alpha`.
///
/// The design should contain its own intercept column. Columns that are
/// linear combinations of earlier ones get a zero coefficient.
pub fn quantile_regression_fit<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, alpha: T) -> Result<QrFit<T>, BenchError> {
    let (n, cols) = x.dim();
    if y.len() != n {
        return Err(BenchError::Shape(format!("{n} design rows vs {} targets", y.len())));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(BenchError::BadLevel(alpha.as_f64()));
    }
    if n <= cols {
        return Err(BenchError::TooFewRows { rows: n, needed: cols + 1 });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(BenchError::NonFinite);
    }
    let keep = independent_columns(x, T::lit(RANK_TOL));
    let mut coefficients = vec![T::zero(); cols];
    if keep.is_empty() {
        let objective = check_loss(x, y, &coefficients, alpha);
        return Ok(QrFit { coefficients, objective, edge_steps: 0 });
    }
    let reduced = x.select(Axis(1), &keep);
    let m = merge(reduced.view(), y);
    let p = keep.len();
    let y_scale = y.iter().fold(T::one(), |a, v| a.max(v.abs()));
    let rtol = T::lit(RESIDUAL_TOL) * y_scale;

    let start = irls_start(&m, alpha, y_scale);
    let r0 = &m.y - &m.x.dot(&start);
    let mut order: Vec<usize> = (0..m.y.len()).collect();
    order.sort_by(|&a, &b| r0[a].abs().partial_cmp(&r0[b].abs()).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let basis = independent_rows(&m.x, &order);
    let mut beta = solve_basis(&m, &basis).ok_or_else(|| BenchError::NonConvergence("singular starting vertex".into()))?;

    let mut steps = 0;
    loop {
        if steps >= MAX_EDGE_STEPS {
            return Err(BenchError::NonConvergence(format!("quantile regression: {steps} edge steps")));
        }
        let r = &m.y - &m.x.dot(&beta);
        let zero: Vec<usize> = (0..r.len()).filter(|&i| r[i].abs() <= rtol).collect();
        if binomial(zero.len(), p - 1) > MAX_EDGE_SETS {
            return Err(BenchError::Degenerate { zeros: zero.len() });
        }
        let mut descent: Option<Edge<T>> = None;
        let mut flat: Option<Edge<T>> = None;
        for_each_subset(&zero, p - 1, |s| {
            let rows = m.x.select(Axis(0), s);
            let Some(d) = null_vector(rows.view(), T::lit(RANK_TOL)) else { return };
            let d = &d / d.dot(&d).sqrt();
            for sign in [T::one(), -T::one()] {
                let dir = &d * sign;
                let u = m.x.dot(&dir);
                let mut slope = T::zero();
                let mut size = T::zero();
                for i in 0..u.len() {
                    let wu = m.w[i] * u[i];
                    size += wu.abs();
                    slope += if r[i].abs() <= rtol {
                        if u[i] > T::zero() { (T::one() - alpha) * wu } else { -alpha * wu }
                    } else if r[i] > T::zero() {
                        -alpha * wu
                    } else {
                        (T::one() - alpha) * wu
                    };
                }
                let tol = T::lit(SLOPE_TOL) * size.max(T::min_positive_value());
                if slope < -tol {
                    if descent.as_ref().is_none_or(|e| slope < e.slope) {
                        descent = Some(Edge { dir, subset: s.to_vec(), slope });
                    }
                } else if slope.abs() <= tol && flat.is_none() && lex_negative(&dir) {
                    flat = Some(Edge { dir, subset: s.to_vec(), slope });
                }
            }
        });
        let Some(edge) = descent.or(flat) else { break };
        let improving = edge.slope < T::zero();
        let u = m.x.dot(&edge.dir);
        let mut bps: Vec<(T, usize)> = (0..u.len())
            .filter(|&i| r[i].abs() > rtol && u[i] != T::zero())
            .map(|i| (r[i] / u[i], i))
            .filter(|&(t, _)| t > T::zero())
            .collect();
        bps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        let mut slope = edge.slope;
        let mut stop = None;
        for &(t, i) in &bps {
            slope += m.w[i] * u[i].abs();
            if !improving || slope >= T::zero() {
                stop = Some((t, i));
                break;
            }
        }
        let Some((t, entering)) = stop else {
            return Err(BenchError::NonConvergence("unbounded edge".into()));
        };
        let mut rows = edge.subset.clone();
        rows.push(entering);
        beta = solve_basis(&m, &rows).unwrap_or_else(|| &beta + &(&edge.dir * t));
        steps += 1;
    }
    for (k, &j) in keep.iter().enumerate() {
        coefficients[j] = beta[k];
    }
    let objective = check_loss(x, y, &coefficients, alpha);
    Ok(QrFit { coefficients, objective, edge_steps: steps })
}
