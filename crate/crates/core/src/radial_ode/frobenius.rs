//! Frobenius series at the regular singular point `t = 0`.
//!
//! A series solution is `A(t) = Σ_p a_p t^{r + 2p}`. With `P(s) = s(s+n−1) − L_0`
//! the coefficients satisfy `P(r + 2p) a_p = Σ_{q≥1} (L_q − h_q (r + 2p − 2q)) a_{p−q}`.

use nalgebra::{DMatrix, DVector};

use super::system::RadialSystem;
use crate::error::{Error, Result};
use crate::spaceform::unit_sphere_volume;

/// Default number of series terms.
pub const DEFAULT_ORDER: usize = 6;
const MAX_ORDER: usize = 40;
/// Relative truncation error accepted at the initialization radius.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// `Σ_p coeffs[p] t^{exponent + 2p}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrobeniusSeries {
    pub exponent: f64,
    pub coeffs: Vec<DVector<f64>>,
}

/// The singular branch normalized as `t^{1−n}/((n−1) vol S^n) · id + …`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularData {
    pub exponent: f64,
    pub leading_coeff: f64,
    pub series: FrobeniusSeries,
}

impl FrobeniusSeries {
    pub fn value(&self, t: f64) -> DVector<f64> {
        self.sum(t, |p| t.powf(self.exponent + 2.0 * p as f64))
    }

    pub fn deriv(&self, t: f64) -> DVector<f64> {
        self.sum(t, |p| {
            let s = self.exponent + 2.0 * p as f64;
            if s == 0.0 {
                0.0
            } else {
                s * t.powf(s - 1.0)
            }
        })
    }

    pub fn second(&self, t: f64) -> DVector<f64> {
        self.sum(t, |p| {
            let s = self.exponent + 2.0 * p as f64;
            if s == 0.0 || s == 1.0 {
                0.0
            } else {
                s * (s - 1.0) * t.powf(s - 2.0)
            }
        })
    }

    fn sum(&self, _t: f64, w: impl Fn(usize) -> f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.coeffs[0].len());
        for (p, c) in self.coeffs.iter().enumerate().rev() {
            out += c * w(p);
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { exponent: self.exponent, coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// Size of the last retained term relative to the first, at `t`.
    pub fn truncation_estimate(&self, t: f64) -> f64 {
        let first = self.coeffs[0].amax();
        let p = self.coeffs.len() - 1;
        if first == 0.0 {
            return 0.0;
        }
        self.coeffs[p].amax() * t.powi(2 * p as i32) / first
    }
}

/// Computes `order + 1` coefficients of the series with leading exponent `r`
/// and leading vector `a0` (which must lie in the kernel of `P(r)`).
pub fn series(system: &RadialSystem, r: f64, a0: DVector<f64>, order: usize) -> Result<FrobeniusSeries> {
    let n = system.space().n() as f64;
    let (h, l) = system.expansion(order + 1);
    let d = system.dim();
    let p0 = |s: f64| DMatrix::identity(d, d) * (s * (s + n - 1.0)) - &l[0];
    let lead_res = (p0(r) * &a0).amax();
    if lead_res > 1e-9 * a0.amax() * (1.0 + r * r + l[0].amax()) {
        return Err(Error::Frobenius(format!("exponent {r} does not admit the leading vector (defect {lead_res:e})")));
    }
    let mut coeffs = vec![a0];
    for p in 1..=order {
        let s = r + 2.0 * p as f64;
        let mut rhs = DVector::zeros(d);
        for q in 1..=p {
            let op = &l[q] - DMatrix::identity(d, d) * (h[q] * (s - 2.0 * q as f64));
            rhs += op * &coeffs[p - q];
        }
        coeffs.push(solve_resonant(&p0(s), &rhs, s)?);
    }
    Ok(FrobeniusSeries { exponent: r, coeffs })
}

// Solves P x = b, using the minimum-norm solution when P is singular and
// rejecting inconsistent right-hand sides (those would need a log term).
fn solve_resonant(p: &DMatrix<f64>, b: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
    let svd = p.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-12 * smax.max(1.0);
    let x = svd.solve(b, tol).map_err(|e| Error::Frobenius(e.to_string()))?;
    let defect = (p * &x - b).amax();
    if defect > 1e-9 * b.amax().max(1e-300) && b.amax() > 0.0 {
        return Err(Error::Frobenius(format!(
            "resonance at exponent {s} requires a logarithmic term (defect {defect:e})"
        )));
    }
    Ok(x)
}

/// Leading coefficient `1/((n−1) vol S^n)` of the singular branch.
pub fn leading_coefficient(system: &RadialSystem) -> Result<f64> {
    let n = system.space().n();
    if n < 2 {
        return Err(Error::Unsupported("singular branch needs dimension m ≥ 3".into()));
    }
    Ok(1.0 / ((n as f64 - 1.0) * unit_sphere_volume(n)))
}

/// Series of the singular branch with `order + 1` terms.
pub fn singular_series(system: &RadialSystem, order: usize) -> Result<SingularData> {
    let c = leading_coefficient(system)?;
    let exponent = 1.0 - system.space().n() as f64;
    let series = series(system, exponent, system.identity() * c, order)?;
    Ok(SingularData { exponent, leading_coeff: c, series })
}

/// Picks the smallest series order whose truncation estimate at `t0` is
/// below [`TRUNCATION_TOL`], starting from `min_order`.
pub fn series_for_radius(
    system: &RadialSystem,
    r: f64,
    a0: &DVector<f64>,
    t0: f64,
    min_order: usize,
) -> Result<FrobeniusSeries> {
    let full = series(system, r, a0.clone(), MAX_ORDER)?;
    let first = full.coeffs[0].amax();
    let needed = (min_order..=MAX_ORDER).find(|&p| {
        (p..=MAX_ORDER.min(p + 2)).all(|q| full.coeffs[q].amax() * t0.powi(2 * q as i32) <= TRUNCATION_TOL * first)
    });
    match needed {
        Some(p) => Ok(FrobeniusSeries { exponent: r, coeffs: full.coeffs[..=p].to_vec() }),
        None => Err(Error::Frobenius(format!(
            "t0 = {t0} too large: truncation error stays above {TRUNCATION_TOL:e} up to order {MAX_ORDER}"
        ))),
    }
}

/// Value and derivative of the singular branch at `t0`, with its series.
pub fn frobenius_init(system: &RadialSystem, t0: f64) -> Result<(DVector<f64>, DVector<f64>, SingularData)> {
    frobenius_init_with_order(system, t0, DEFAULT_ORDER)
}

/// As [`frobenius_init`] with an explicit series order; the order is raised
/// as needed but `t0` must not exceed `1e−2`.
pub fn frobenius_init_with_order(
    system: &RadialSystem,
    t0: f64,
    order: usize,
) -> Result<(DVector<f64>, DVector<f64>, SingularData)> {
    if !(t0 > 0.0) {
        return Err(Error::InvalidArgument(format!("t0 must be positive, got {t0}")));
    }
    if t0 > 1e-2 {
        let required = required_order(system, t0);
        return Err(Error::Frobenius(format!(
            "t0 = {t0} exceeds 1e-2; a truncation error below {TRUNCATION_TOL:e} would need order {}",
            required.map(|p| p.to_string()).unwrap_or_else(|| format!("> {MAX_ORDER}"))
        )));
    }
    let c = leading_coefficient(system)?;
    let exponent = 1.0 - system.space().n() as f64;
    let series = series_for_radius(system, exponent, &(system.identity() * c), t0, order)?;
    let data = SingularData { exponent, leading_coeff: c, series };
    Ok((data.series.value(t0), data.series.deriv(t0), data))
}

fn required_order(system: &RadialSystem, t0: f64) -> Option<usize> {
    let c = leading_coefficient(system).ok()?;
    let exponent = 1.0 - system.space().n() as f64;
    series_for_radius(system, exponent, &(system.identity() * c), t0, 1)
        .ok()
        .map(|s| s.coeffs.len() - 1)
}

/// Exponent `r ≥ 0` and leading vector of each regular series, one per
/// eigenvector of `L_0`, ordered by exponent.
pub fn regular_leads(system: &RadialSystem) -> Result<Vec<(f64, DVector<f64>)>> {
    let n = system.space().n() as f64;
    let (_, l) = system.expansion(1);
    let mut out = Vec::new();
    for (mu, v) in real_eigenpairs(&l[0])? {
        let disc = (n - 1.0) * (n - 1.0) + 4.0 * mu;
        if disc < 0.0 {
            return Err(Error::Frobenius(format!("complex indicial roots for eigenvalue {mu}")));
        }
        let r = 0.5 * (-(n - 1.0) + disc.sqrt());
        // snap to the nearest integer exponent; indicial roots are integral here
        let r = if (r - r.round()).abs() < 1e-9 { r.round() } else { r };
        out.push((r, v));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

/// Real eigenpairs of a diagonalizable matrix with real spectrum.
pub fn real_eigenpairs(m: &DMatrix<f64>) -> Result<Vec<(f64, DVector<f64>)>> {
    let d = m.nrows();
    let eig = m.complex_eigenvalues();
    let scale = m.amax().max(1.0);
    let mut values: Vec<f64> = Vec::new();
    for z in eig.iter() {
        if z.im.abs() > 1e-9 * scale {
            return Err(Error::Frobenius("complex spectrum".into()));
        }
        let re = if z.re.abs() < 1e-12 * scale { 0.0 } else { z.re };
        if !values.iter().any(|&v| (v - re).abs() < 1e-9 * scale) {
            values.push(re);
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    for mu in values {
        let shifted = m - DMatrix::identity(d, d) * mu;
        for v in null_space(&shifted, 1e-9 * scale) {
            out.push((mu, v));
        }
    }
    if out.len() != d {
        return Err(Error::Frobenius("matrix is not diagonalizable".into()));
    }
    Ok(out)
}

/// Orthonormal basis of the null space of `m` (singular values below `tol`).
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let cols = m.ncols();
    // pad to a square matrix so that the full right singular basis is available
    let rows = m.nrows().max(cols);
    let mut sq = DMatrix::zeros(rows, cols);
    sq.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    (0..cols)
        .filter(|&i| svd.singular_values[i] <= tol)
        .map(|i| {
            let mut v = vt.row(i).transpose();
            // deterministic sign: first significant entry positive
            if let Some(x) = v.iter().find(|x| x.abs() > 1e-8) {
                if *x < 0.0 {
                    v = -v;
                }
            }
            v
        })
        .collect()
}
