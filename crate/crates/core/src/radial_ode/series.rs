//! Truncated power series in `u = x²` for the even functions entering the
//! coefficient expansions at `t = 0`.

/// Coefficients `c_j` of `Σ c_j u^j`, truncated to a fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct EvenSeries(pub Vec<f64>);

impl EvenSeries {
    /// `sinh(x)/x`.
    pub fn sinhc(len: usize) -> Self {
        Self((0..len).map(|j| 1.0 / factorial(2 * j + 1)).collect())
    }

    /// `cosh(x)`.
    pub fn cosh(len: usize) -> Self {
        Self((0..len).map(|j| 1.0 / factorial(2 * j)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        Self(
            (0..len)
                .map(|k| (0..=k).map(|i| self.0[i] * other.0[k - i]).sum())
                .collect(),
        )
    }

    /// Reciprocal of a series with nonzero constant term.
    pub fn recip(&self) -> Self {
        let len = self.len();
        let mut out = vec![0.0; len];
        out[0] = 1.0 / self.0[0];
        for k in 1..len {
            let s: f64 = (1..=k).map(|i| self.0[i] * out[k - i]).sum();
            out[k] = -s / self.0[0];
        }
        Self(out)
    }

    /// Coefficient of `u^j`, zero beyond the truncation.
    pub fn coeff(&self, j: usize) -> f64 {
        self.0.get(j).copied().unwrap_or(0.0)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Expansions in `u = (λt)²` of the per-axis coefficient functions:
/// `x coth x`, `x²/sinh²x`, `x² cosh x/sinh²x` and `x² cosh²x/sinh²x`.
#[derive(Clone, Debug)]
pub struct AxisSeries {
    pub x_coth: EvenSeries,
    pub inv_sinh2: EvenSeries,
    pub cosh_inv_sinh2: EvenSeries,
    pub cosh2_inv_sinh2: EvenSeries,
}

impl AxisSeries {
    pub fn new(len: usize) -> Self {
        let s = EvenSeries::sinhc(len);
        let c = EvenSeries::cosh(len);
        let inv_s = s.recip();
        let inv_s2 = inv_s.mul(&inv_s);
        Self {
            x_coth: c.mul(&inv_s),
            cosh_inv_sinh2: c.mul(&inv_s2),
            cosh2_inv_sinh2: c.mul(&c).mul(&inv_s2),
            inv_sinh2: inv_s2,
        }
    }
}
