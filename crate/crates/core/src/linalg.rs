//! Small dense solvers for the regression kernels.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::Scalar;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot is below `tol` times the largest entry.
pub fn solve<T: Scalar>(a: ArrayView2<T>, b: ArrayView1<T>, tol: T) -> Option<Array1<T>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    let mut m = a.to_owned();
    let mut rhs = b.to_owned();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let (piv, best) = (col..n).map(|r| (r, m[[r, col]].abs())).fold((col, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap([col, c], [piv, c]);
            }
            rhs.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[[r, col]] / m[[col, col]];
            if f != T::zero() {
                for c in col..n {
                    let v = m[[col, c]];
                    m[[r, c]] -= f * v;
                }
                let v = rhs[col];
                rhs[r] -= f * v;
            }
        }
    }
    let mut x = Array1::zeros(n);
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= m[[r, c]] * x[c];
        }
        x[r] = s / m[[r, r]];
    }
    Some(x)
}

/// A nonzero vector spanning the null space of a `(p-1) x p` matrix of full
/// row rank; `None` if the rows are dependent.
pub fn null_vector<T: Scalar>(rows: ArrayView2<T>, tol: T) -> Option<Array1<T>> {
    let (r, p) = rows.dim();
    debug_assert_eq!(r + 1, p);
    let mut m: Array2<T> = rows.to_owned();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs())).max(T::min_positive_value());
    let mut pivot_cols = Vec::with_capacity(r);
    let mut row = 0;
    for col in 0..p {
        if row == r {
            break;
        }
        let (piv, best) = (row..r).map(|i| (i, m[[i, col]].abs())).fold((row, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol * scale {
            continue;
        }
        if piv != row {
            for c in 0..p {
                m.swap([row, c], [piv, c]);
            }
        }
        let d = m[[row, col]];
        for c in 0..p {
            m[[row, c]] /= d;
        }
        for i in 0..r {
            if i != row {
                let f = m[[i, col]];
                if f != T::zero() {
                    for c in 0..p {
                        let v = m[[row, c]];
                        m[[i, c]] -= f * v;
                    }
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    if pivot_cols.len() != r {
        return None;
    }
    let free = (0..p).find(|c| !pivot_cols.contains(c))?;
    let mut v = Array1::zeros(p);
    v[free] = T::one();
    for (i, &pc) in pivot_cols.iter().enumerate() {
        v[pc] = -m[[i, free]];
    }
    Some(v)
}

/// Indices of a maximal set of linearly independent columns, chosen greedily
/// in column order by modified Gram–Schmidt.
pub fn independent_columns<T: Scalar>(x: ArrayView2<T>, tol: T) -> Vec<usize> {
    let mut basis: Vec<Array1<T>> = Vec::new();
    let mut keep = Vec::new();
    for (j, col) in x.columns().into_iter().enumerate() {
        let norm0 = col.dot(&col).sqrt();
        if norm0 == T::zero() {
            continue;
        }
        let mut v = col.to_owned();
        for q in &basis {
            let proj = q.dot(&v);
            v.scaled_add(-proj, q);
        }
        let norm = v.dot(&v).sqrt();
        if norm > tol * norm0 {
            basis.push(v / norm);
            keep.push(j);
        }
    }
    keep
}
