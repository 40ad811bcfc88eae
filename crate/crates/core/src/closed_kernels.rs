//! Closed-form reference profiles: Newton potentials, the scalar Green's
//! function of a harmonic space, and the explicit one-form profile on `H^3`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jet::{Jet, Real};
use crate::quadrature;
use crate::spaceform::{unit_sphere_volume, ModelSpace, SpaceKind};

/// Below this radius the `H^3` one-form profile is evaluated by its Laurent series.
pub const H3_SERIES_CROSSOVER: f64 = 1e-2;

/// Laurent coefficients of `π·α(t)` and `π·β(t)` for powers `t^{-1} … t^6`.
const ALPHA_SERIES: [f64; 8] = [
    1.0 / 4.0,
    -1.0 / 12.0,
    -1.0 / 6.0,
    1.0 / 30.0,
    1.0 / 20.0,
    -1.0 / 126.0,
    -2.0 / 189.0,
    1.0 / 675.0,
];
const BETA_SERIES: [f64; 8] = [
    1.0 / 4.0,
    -1.0 / 12.0,
    -1.0 / 6.0,
    1.0 / 40.0,
    19.0 / 480.0,
    -17.0 / 3360.0,
    -43.0 / 6048.0,
    29.0 / 33600.0,
];

/// Newton potential of `ℝ^m` at distance `r`.
pub fn newton_potential(m: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {r}")));
    }
    match m {
        0 | 1 => Err(Error::InvalidArgument(format!("dimension {m} < 2"))),
        2 => Ok(-r.ln() / (2.0 * PI)),
        _ => Ok(1.0 / ((m as f64 - 2.0) * r.powi(m as i32 - 2) * unit_sphere_volume(m - 1))),
    }
}

fn alpha_formula<R: Real>(t: R) -> R {
    let c = R::cst;
    let (s, ch) = (t.sinh(), t.cosh());
    ((c(2.0) * t + c(1.0)) * s - (t * t + t) * ch) / (c(4.0 * PI) * s * s * s)
}

fn beta_formula<R: Real>(t: R) -> R {
    let c = R::cst;
    let (s, ch) = (t.sinh(), t.cosh());
    (c(3.0) * s * s - (ch + c(2.0) * t) * s + t * t + t) / (c(8.0 * PI) * s * s * s) - t / (c(4.0 * PI) * (ch + c(1.0)))
}

// Same expressions divided through by sinh once or twice, for t where sinh³ overflows.
fn alpha_formula_large<R: Real>(t: R) -> R {
    let c = R::cst;
    let (s, ch) = (t.sinh(), t.cosh());
    let coth = ch / s;
    ((c(2.0) * t + c(1.0)) - (t * t + t) * coth) / (c(4.0 * PI) * s * s)
}

fn beta_formula_large<R: Real>(t: R) -> R {
    let c = R::cst;
    let (s, ch) = (t.sinh(), t.cosh());
    let coth = ch / s;
    (c(3.0) - (coth + c(2.0) * t / s) + (t * t + t) / (s * s)) / (c(8.0 * PI) * s) - t / (c(4.0 * PI) * (ch + c(1.0)))
}

fn laurent<R: Real>(coeffs: &[f64; 8], t: R) -> R {
    let mut poly = R::cst(coeffs[7]);
    for &a in coeffs[1..7].iter().rev() {
        poly = poly * t + R::cst(a);
    }
    (R::cst(coeffs[0]) / t + poly) / R::cst(PI)
}

fn h3_oneform_generic<R: Real>(t: R) -> (R, R) {
    let tv = t.value();
    if tv < H3_SERIES_CROSSOVER {
        (laurent(&ALPHA_SERIES, t), laurent(&BETA_SERIES, t))
    } else if tv > 200.0 {
        (alpha_formula_large(t), beta_formula_large(t))
    } else {
        (alpha_formula(t), beta_formula(t))
    }
}

/// The explicit `H^3` one-form profile `(α(t), β(t))`.
pub fn h3_oneform_profile(t: f64) -> Result<(f64, f64)> {
    check_t(t)?;
    Ok(h3_oneform_generic(t))
}

/// `(α, β)` with first and second derivatives.
pub fn h3_oneform_jets(t: f64) -> Result<(Jet, Jet)> {
    check_t(t)?;
    Ok(h3_oneform_generic(Jet::var(t)))
}

/// Both branches of the `H^3` profile evaluated at the same point, for
/// crossover diagnostics: `(formula, series)`.
pub fn h3_oneform_branches(t: f64) -> ((f64, f64), (f64, f64)) {
    (
        (alpha_formula(t), beta_formula(t)),
        (laurent(&ALPHA_SERIES, t), laurent(&BETA_SERIES, t)),
    )
}

/// Decaying scalar Green's function `A(t) = ∫_t^∞ ds/σ(s)`.
///
/// Closed forms are used for `ℝ^m` and `H^3`; otherwise adaptive quadrature.
pub fn scalar_green(space: &ModelSpace, t: f64) -> Result<f64> {
    check_t(t)?;
    match space.kind() {
        SpaceKind::Euclidean => {
            if space.dim() <= 2 {
                return Err(Error::Unsupported("scalar Green's function diverges for m ≤ 2".into()));
            }
            newton_potential(space.dim(), t)
        }
        SpaceKind::RealHyperbolic if space.dim() == 3 && space.has_unit_geometry() => {
            Ok(1.0 / (2.0 * PI * (2.0 * t).exp_m1()))
        }
        SpaceKind::RealHyperbolic => scalar_green_quadrature(space, t),
    }
}

/// `∫_t^∞ ds/σ(s)` by adaptive Gauss-Legendre after the substitution `s = t/w`.
pub fn scalar_green_quadrature(space: &ModelSpace, t: f64) -> Result<f64> {
    check_t(t)?;
    if space.kind() == SpaceKind::Euclidean && space.dim() <= 2 {
        return Err(Error::Unsupported("scalar Green's function diverges for m ≤ 2".into()));
    }
    let mut integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let s = t / w;
        match space.sphere_volume(s) {
            Ok(sigma) if sigma.is_finite() => t / (w * w * sigma),
            _ => 0.0,
        }
    };
    quadrature::adaptive(&mut integrand, 0.0, 1.0, 1e-12, 50)
}

/// A closed-form profile for a particular space and degree, in the component
/// layout used by radial profiles: `[β]` for `l = 0`, `[α]` for `l = m`,
/// `[α, β]` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForm {
    pub space: ModelSpace,
    pub degree: usize,
}

impl ClosedForm {
    /// Available closed forms: every degree on `ℝ^m` (`m ≥ 3`) and every
    /// degree on `H^3`.
    pub fn lookup(space: &ModelSpace, degree: usize) -> Option<Self> {
        let ok = degree <= space.dim()
            && match space.kind() {
                SpaceKind::Euclidean => space.dim() >= 3,
                SpaceKind::RealHyperbolic => space.dim() == 3 && space.has_unit_geometry(),
            };
        ok.then(|| Self { space: space.clone(), degree })
    }

    /// Component values and first derivatives at `t`.
    pub fn eval(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        check_t(t)?;
        let m = self.space.dim();
        let l = self.degree;
        let pick = |jets: Vec<Jet>| (jets.iter().map(|j| j.v).collect(), jets.iter().map(|j| j.d).collect());
        match self.space.kind() {
            SpaceKind::Euclidean => {
                let n = newton_potential(m, t)?;
                let dn = -(m as f64 - 2.0) * n / t;
                let count = if l == 0 || l == m { 1 } else { 2 };
                Ok((vec![n; count], vec![dn; count]))
            }
            SpaceKind::RealHyperbolic => match l {
                0 | 3 => {
                    let g = scalar_green(&self.space, t)?;
                    let dg = -1.0 / self.space.sphere_volume(t)?;
                    Ok((vec![g], vec![dg]))
                }
                1 => {
                    let (a, b) = h3_oneform_jets(t)?;
                    Ok(pick(vec![a, b]))
                }
                _ => {
                    let (a, b) = h3_oneform_jets(t)?;
                    Ok(pick(vec![b, a]))
                }
            },
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be positive, got {t}")))
    }
}
