//! First-order form of the radial equation at the singular point.
//!
//! With `z = σA/t`, `y = σA'` and `t = e^{-s}` the equation becomes
//! `Y'(s) = (C + R(s)) Y(s)` where
//! `C = −[[(n−1)·I, I], [W₋₂, 0]]` and
//! `R(s) = −[[(t h(t) − n)·I, 0], [t² L(t) − W₋₂, 0]]` at `t = e^{-s}`.
//! `W₋₂` is the `t^{-2}` coefficient of `L`.

use nalgebra::{DMatrix, DVector};

use super::frobenius::{null_space, real_eigenpairs};
use super::system::RadialSystem;
use crate::error::Result;
use crate::quadrature;

#[derive(Clone, Debug)]
pub struct LevinsonForm {
    system: RadialSystem,
    n: f64,
    w: DMatrix<f64>,
    c: DMatrix<f64>,
}

/// One eigenvalue of `W₋₂` with the two eigenvalues of `C` it produces.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpectrum {
    pub w: f64,
    /// Roots of `λ² + (n−1)λ − w = 0`, larger first.
    pub eigenvalues: [f64; 2],
}

impl LevinsonForm {
    pub fn new(system: &RadialSystem) -> Self {
        let d = system.dim();
        let n = system.space().n() as f64;
        let (_, l) = system.expansion(1);
        let w = l[0].clone();
        let mut c = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            c[(i, i)] = -(n - 1.0);
            c[(i, d + i)] = -1.0;
        }
        c.view_mut((d, 0), (d, d)).copy_from(&(-&w));
        Self { system: system.clone(), n, w, c }
    }

    pub fn constant(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn w_minus2(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Spectrum of `C` grouped by the eigenvalues of `W₋₂`.
    pub fn block_spectrum(&self) -> Result<Vec<BlockSpectrum>> {
        let nm1 = self.n - 1.0;
        Ok(real_eigenpairs(&self.w)?
            .into_iter()
            .map(|(w, _)| {
                let disc = (nm1 * nm1 + 4.0 * w).sqrt();
                BlockSpectrum { w, eigenvalues: [0.5 * (-nm1 + disc), 0.5 * (-nm1 - disc)] }
            })
            .collect())
    }

    /// All eigenvalues of `C`, in decreasing order.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self.block_spectrum()?.iter().flat_map(|b| b.eigenvalues).collect();
        out.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(out)
    }

    /// Eigenpairs of `C`, built blockwise from those of `W₋₂`:
    /// `u = (v, −(n−1+λ) v)`.
    pub fn eigenpairs(&self) -> Result<Vec<(f64, DVector<f64>)>> {
        let d = self.system.dim();
        let nm1 = self.n - 1.0;
        let mut out = Vec::with_capacity(2 * d);
        for (w, v) in real_eigenpairs(&self.w)? {
            let disc = (nm1 * nm1 + 4.0 * w).sqrt();
            for lambda in [0.5 * (-nm1 + disc), 0.5 * (-nm1 - disc)] {
                let mut u = DVector::zeros(2 * d);
                u.rows_mut(0, d).copy_from(&v);
                u.rows_mut(d, d).copy_from(&(&v * -(nm1 + lambda)));
                out.push((lambda, u));
            }
        }
        Ok(out)
    }

    /// Basis of the kernel of `C`, each vector scaled to `(−v/(n−1), v)`.
    pub fn zero_modes(&self) -> Vec<DVector<f64>> {
        let d = self.system.dim();
        null_space(&self.w, 1e-12 * self.w.amax().max(1.0))
            .into_iter()
            .map(|v| {
                let mut u = DVector::zeros(2 * d);
                u.rows_mut(0, d).copy_from(&(&v / -(self.n - 1.0)));
                u.rows_mut(d, d).copy_from(&v);
                u
            })
            .collect()
    }

    /// `R(s)`.
    pub fn residual(&self, s: f64) -> DMatrix<f64> {
        let d = self.system.dim();
        let t = (-s).exp();
        let th = t * self.system.mean_curvature(t) - self.n;
        let tl = self.system.coefficient_matrix(t) * (t * t) - &self.w;
        let mut r = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            r[(i, i)] = -th;
        }
        r.view_mut((d, 0), (d, d)).copy_from(&(-tl));
        r
    }

    /// `∫_a^∞ ‖R(s)‖ ds` (Frobenius norm). `R` decays like `e^{-2s}`, so the
    /// integral is cut where `e^{-2s}` drops below `1e-16` relative to `e^{-2a}`.
    pub fn residual_integral(&self, a: f64) -> Result<f64> {
        let b = a + 0.5 * 16.0 * std::f64::consts::LN_10;
        let mut f = |s: f64| self.residual(s).norm();
        quadrature::adaptive(&mut f, a, b, 1e-10, 30)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_ode::system::assemble_system;
    use crate::spaceform::ModelSpace;

    #[test]
    fn euclidean_scalar_spectrum() {
        for m in 3..6 {
            let sys = assemble_system(&ModelSpace::euclidean(m).unwrap(), 0).unwrap();
            let lev = LevinsonForm::new(&sys);
            assert_eq!(lev.w_minus2().amax(), 0.0);
            let mut spec = lev.spectrum().unwrap();
            spec.iter_mut().for_each(|x| *x = -*x);
            assert_eq!(spec, vec![0.0, (m - 2) as f64]);
            assert!(lev.residual(0.3).amax() < 1e-14);
        }
    }

    #[test]
    fn zero_mode_is_annihilated() {
        let space = ModelSpace::hyperbolic(3).unwrap();
        for l in 0..=3 {
            let lev = LevinsonForm::new(&assemble_system(&space, l).unwrap());
            let modes = lev.zero_modes();
            assert_eq!(modes.len(), 1, "degree {l}");
            let u = &modes[0];
            assert!((lev.constant() * u).amax() < 1e-12);
            let d = u.len() / 2;
            for i in 0..d {
                assert!((u[i] + u[d + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eigenpairs_and_distinct_roots() {
        let space = ModelSpace::hyperbolic(5).unwrap();
        for l in 0..=5 {
            let lev = LevinsonForm::new(&assemble_system(&space, l).unwrap());
            for b in lev.block_spectrum().unwrap() {
                assert!(b.w >= -1e-12);
                assert!(b.eigenvalues[0] > b.eigenvalues[1]);
            }
            for (lambda, u) in lev.eigenpairs().unwrap() {
                assert!((lev.constant() * &u - &u * lambda).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn residual_is_integrable() {
        let space = ModelSpace::hyperbolic(3).unwrap();
        let lev = LevinsonForm::new(&assemble_system(&space, 1).unwrap());
        let r = lev.residual(5.0).norm();
        let r2 = lev.residual(6.0).norm();
        assert!((r2 / r - (-2.0f64).exp()).abs() < 1e-3);
        let total = lev.residual_integral(0.0).unwrap();
        assert!(total.is_finite() && total > 0.0);
    }
}
