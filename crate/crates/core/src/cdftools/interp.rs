use super::CdfError;
use crate::Scalar;

/// Fritsch–Carlson monotone cubic Hermite interpolant through strictly
/// increasing knots. Constant beyond the first and last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic<T> {
    x: Vec<T>,
    y: Vec<T>,
    tangents: Vec<T>,
}

pub fn monotone_cubic<T: Scalar>(x: &[T], y: &[T]) -> Result<MonotoneCubic<T>, CdfError> {
    MonotoneCubic::new(x, y)
}

impl<T: Scalar> MonotoneCubic<T> {
    pub fn new(x: &[T], y: &[T]) -> Result<Self, CdfError> {
        let n = x.len();
        if y.len() != n {
            return Err(CdfError::Length { what: "knot values", got: y.len(), expected: n });
        }
        if n < 2 {
            return Err(CdfError::TooFewKnots(n));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(CdfError::NonFinite("knots"));
        }
        for i in 0..n - 1 {
            if !(x[i] < x[i + 1]) {
                return Err(CdfError::NonIncreasingKnots { what: "x", index: i + 1 });
            }
            if !(y[i] < y[i + 1]) {
                return Err(CdfError::NonIncreasingKnots { what: "y", index: i + 1 });
            }
        }
        let secants: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        let mut m = vec![T::zero(); n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        let half = T::lit(0.5);
        for k in 1..n - 1 {
            m[k] = half * (secants[k - 1] + secants[k]);
        }
        // Sequential limiter; a rescaled right tangent feeds the next interval.
        let nine = T::lit(9.0);
        let three = T::lit(3.0);
        for k in 0..n - 1 {
            let a = m[k] / secants[k];
            let b = m[k + 1] / secants[k];
            let r2 = a * a + b * b;
            if r2 > nine {
                let tau = three / r2.sqrt();
                m[k] = tau * a * secants[k];
                m[k + 1] = tau * b * secants[k];
            }
        }
        Ok(Self { x: x.to_vec(), y: y.to_vec(), tangents: m })
    }

    pub fn knots(&self) -> (&[T], &[T]) {
        (&self.x, &self.y)
    }

    pub fn tangents(&self) -> &[T] {
        &self.tangents
    }

    pub fn eval(&self, at: T) -> T {
        let n = self.x.len();
        if !(at > self.x[0]) {
            return self.y[0];
        }
        if !(at < self.x[n - 1]) {
            return self.y[n - 1];
        }
        // First knot strictly greater than `at`, minus one.
        let k = self.x.partition_point(|&v| v <= at) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (at - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = three * t2 - two * t3;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.tangents[k] + h01 * self.y[k + 1] + h11 * h * self.tangents[k + 1]
    }
}
