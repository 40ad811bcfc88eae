//! Two-point kernels built from a radial profile.
//!
//! A kernel at the ordered pair `(y, x)` is a linear map from `Λ^k T_x` to
//! `Λ^l T_y`, so that an operator acts by `(Qω)_x = ∫ ω_y ∘ q_{y,x} dy`. The
//! matrix is stored in the wedge bases of orthonormal frames at `x` (input)
//! and `y` (output). Kernels are first built in the adapted frame at `y`
//! (first vector pointing toward `x`) and its parallel transport to `x`,
//! where `q^A` is the block-diagonal matrix `A(t)`.
//!
//! With `Z_i(A) = ad_i A − cosh(λ_i t) A ad_i` and `s_i = sinh(λ_i t)/λ_i`:
//!
//! - `q^{d*A} = −(A' ∘ ε_T + Σ_i Z_i(A) ∘ ε_{m_i} / s_i)` from `Λ^{l−1}` to `Λ^l`,
//! - `q^{dA} = A' ∘ ι_T + Σ_i Z_i(A) ∘ ι_{m_i} / s_i` from `Λ^{l+1}` to `Λ^l`,
//!
//! where `ε` is the wedge and `ι` the contraction by a frame vector. Pulling a
//! form back through the kernel, `ω ∘ q^{d*A} = d*_x(ω ∘ q^A)` and
//! `ω ∘ q^{dA} = d_x(ω ∘ q^A)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::radial_ode::{Layout, RadialProfile};
use crate::spaceform::exterior::{ad_matrix, contraction_matrix, induced_matrix, wedge_matrix};
use crate::spaceform::{sinh_over, AdaptedFrame, ModelSpace, Point};

/// Frame at `y` whose first vector points toward `x`.
pub fn adapted_frame(space: &ModelSpace, y: &Point, x: &Point) -> Result<AdaptedFrame> {
    space.adapted_frame(y, x)
}

/// The swapped profile of complementary degree.
pub fn hodge_swap(profile: &RadialProfile) -> Result<RadialProfile> {
    profile.hodge_swap()
}

#[derive(Clone, Debug)]
pub struct KernelMap {
    pub space: ModelSpace,
    /// `x`, where the kernel takes its input.
    pub source: Point,
    /// `y`, where the kernel lands.
    pub target: Point,
    /// `(k_in, l_out)`.
    pub degrees: (usize, usize),
    pub frame_in: Vec<DVector<f64>>,
    pub frame_out: Vec<DVector<f64>>,
    pub matrix: DMatrix<f64>,
}

impl KernelMap {
    /// The same map in other orthonormal frames at `x` and `y`.
    pub fn reexpress(&self, frame_in: &[DVector<f64>], frame_out: &[DVector<f64>]) -> KernelMap {
        let m = self.frame_in.len();
        let r_in = DMatrix::from_fn(m, m, |i, j| self.space.inner(&self.frame_in[i], &frame_in[j]));
        let r_out = DMatrix::from_fn(m, m, |i, j| self.space.inner(&frame_out[i], &self.frame_out[j]));
        let matrix = induced_matrix(&r_out, self.degrees.1) * &self.matrix * induced_matrix(&r_in, self.degrees.0);
        KernelMap {
            frame_in: frame_in.to_vec(),
            frame_out: frame_out.to_vec(),
            matrix,
            ..self.clone()
        }
    }

    /// Expressed in the standard frames of the space at both points.
    pub fn in_standard_frames(&self) -> KernelMap {
        let fin = self.space.standard_frame(&self.source);
        let fout = self.space.standard_frame(&self.target);
        self.reexpress(&fin, &fout)
    }

    /// Image of a `k_in`-vector given in `frame_in` coordinates.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// `ω ∘ q` for an `l_out`-covector at `y` in `frame_out` coordinates.
    pub fn pullback(&self, omega: &DVector<f64>) -> DVector<f64> {
        self.matrix.transpose() * omega
    }

    /// The adjoint map from `y` to `x`.
    pub fn transpose(&self) -> KernelMap {
        KernelMap {
            space: self.space.clone(),
            source: self.target.clone(),
            target: self.source.clone(),
            degrees: (self.degrees.1, self.degrees.0),
            frame_in: self.frame_out.clone(),
            frame_out: self.frame_in.clone(),
            matrix: self.matrix.transpose(),
        }
    }
}

/// `A(t)` and `A'(t)` as matrices on `Λ^l` in an adapted basis.
pub fn profile_matrices(profile: &RadialProfile, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = profile.eval(t);
    let system = profile.system();
    match system.layout() {
        Layout::Block(_) => (system.block_to_matrix(&s.value), system.block_to_matrix(&s.deriv)),
        Layout::Matrix { size } => (
            DMatrix::from_row_slice(*size, *size, s.value.as_slice()),
            DMatrix::from_row_slice(*size, *size, s.deriv.as_slice()),
        ),
    }
}

/// Which kernel to build from a profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Green,
    Codifferential,
    Differential,
}

impl KernelKind {
    /// `(k_in, l_out)` for a profile of degree `l` in dimension `m`.
    pub fn degrees(self, m: usize, l: usize) -> Result<(usize, usize)> {
        match self {
            KernelKind::Green => Ok((l, l)),
            KernelKind::Codifferential if l >= 1 => Ok((l - 1, l)),
            KernelKind::Differential if l < m => Ok((l + 1, l)),
            _ => Err(Error::InvalidArgument(format!("{self:?} kernel undefined for degree {l} in dimension {m}"))),
        }
    }
}

/// Kernel builder with the exterior-algebra matrices of one kind and degree
/// precomputed, for repeated evaluation.
#[derive(Clone, Debug)]
pub struct KernelEvaluator<'a> {
    profile: &'a RadialProfile,
    kind: KernelKind,
    degrees: (usize, usize),
    // ε or ι by the adapted frame vectors, and ad_i on Λ^l
    ops: Vec<DMatrix<f64>>,
    ads: Vec<DMatrix<f64>>,
}

impl<'a> KernelEvaluator<'a> {
    pub fn new(profile: &'a RadialProfile, kind: KernelKind) -> Result<Self> {
        let m = profile.space().dim();
        let l = profile.degree();
        let degrees = kind.degrees(m, l)?;
        let ops = match kind {
            KernelKind::Green => Vec::new(),
            KernelKind::Codifferential => (0..m).map(|a| wedge_matrix(m, l - 1, a)).collect(),
            KernelKind::Differential => (0..m).map(|a| contraction_matrix(m, l + 1, a)).collect(),
        };
        let ads = if kind == KernelKind::Green { Vec::new() } else { (1..m).map(|i| ad_matrix(m, l, i)).collect() };
        Ok(Self { profile, kind, degrees, ops, ads })
    }

    pub fn degrees(&self) -> (usize, usize) {
        self.degrees
    }

    /// Kernel matrix at distance `t` in the adapted bases.
    pub fn matrix_at(&self, t: f64) -> DMatrix<f64> {
        let (a, da) = profile_matrices(self.profile, t);
        if self.kind == KernelKind::Green {
            return a;
        }
        let mut out = &da * &self.ops[0];
        for (i, &lambda) in self.profile.space().jacobi_eigenvalues().iter().enumerate() {
            let ad = &self.ads[i];
            let z = ad * &a - &a * ad * (lambda * t).cosh();
            out += z * &self.ops[i + 1] / sinh_over(lambda, t);
        }
        if self.kind == KernelKind::Codifferential {
            -out
        } else {
            out
        }
    }

    /// Kernel at `(y, x)` in the adapted frame at `y` and its transport to `x`.
    pub fn eval(&self, y: &Point, x: &Point) -> Result<KernelMap> {
        let space = self.profile.space();
        let frame = adapted_frame(space, y, x)?;
        let matrix = self.matrix_at(frame.t);
        let frame_in = frame.vectors.iter().map(|v| space.transport_vec(x, y, v)).collect();
        Ok(KernelMap {
            space: space.clone(),
            source: x.clone(),
            target: y.clone(),
            degrees: self.degrees,
            frame_in,
            frame_out: frame.vectors,
            matrix,
        })
    }
}

/// Kernel matrix at distance `t` in the adapted bases.
pub fn adapted_matrix(profile: &RadialProfile, kind: KernelKind, t: f64) -> Result<DMatrix<f64>> {
    Ok(KernelEvaluator::new(profile, kind)?.matrix_at(t))
}

/// Kernel at `(y, x)` in the adapted frame at `y` and its transport to `x`.
pub fn kernel(profile: &RadialProfile, kind: KernelKind, y: &Point, x: &Point) -> Result<KernelMap> {
    KernelEvaluator::new(profile, kind)?.eval(y, x)
}

/// `q^A_{y,x}`.
pub fn green_kernel(profile: &RadialProfile, y: &Point, x: &Point) -> Result<KernelMap> {
    kernel(profile, KernelKind::Green, y, x)
}

/// `q^{d*A}_{y,x}`, from `Λ^{l−1} T_x` to `Λ^l T_y`.
pub fn codifferential_kernel(profile: &RadialProfile, y: &Point, x: &Point) -> Result<KernelMap> {
    kernel(profile, KernelKind::Codifferential, y, x)
}

/// `q^{dA}_{y,x}`, from `Λ^{l+1} T_x` to `Λ^l T_y`.
pub fn differential_kernel(profile: &RadialProfile, y: &Point, x: &Point) -> Result<KernelMap> {
    kernel(profile, KernelKind::Differential, y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_kernels::{h3_oneform_profile, newton_potential, scalar_green};
    use crate::radial_ode::{assemble_system, decaying_solution, GridSpec, ShootingConfig};
    use crate::spaceform::exterior::ExteriorBasis;
    use crate::spaceform::{unit_sphere_volume, TangentVec};
    use std::sync::OnceLock;

    fn solve(space: &ModelSpace, l: usize) -> RadialProfile {
        let sys = assemble_system(space, l).unwrap();
        decaying_solution(&sys, &GridSpec::with_t_max(10.0), &ShootingConfig::default()).unwrap()
    }

    fn h3_profiles() -> &'static Vec<RadialProfile> {
        static CELL: OnceLock<Vec<RadialProfile>> = OnceLock::new();
        CELL.get_or_init(|| {
            let space = ModelSpace::hyperbolic(3).unwrap();
            (0..=3).map(|l| solve(&space, l)).collect()
        })
    }

    fn h3() -> ModelSpace {
        ModelSpace::hyperbolic(3).unwrap()
    }

    fn pt(space: &ModelSpace, z: &[f64]) -> Point {
        space.from_ball(&DVector::from_row_slice(z)).unwrap()
    }

    #[test]
    fn collinear_euclidean_frame() {
        let space = ModelSpace::euclidean(3).unwrap();
        let y = space.point_from_slice(&[0.0, 0.0, 0.0]).unwrap();
        let x = space.point_from_slice(&[2.5, 0.0, 0.0]).unwrap();
        let f = adapted_frame(&space, &y, &x).unwrap();
        for (i, v) in f.vectors.iter().enumerate() {
            let e = DVector::from_fn(3, |r, _| if r == i { 1.0 } else { 0.0 });
            assert!((v - e).amax() < 1e-15);
        }
        assert!(adapted_frame(&space, &y, &y).is_err());
    }

    #[test]
    fn euclidean_green_is_newton_times_identity() {
        let space = ModelSpace::euclidean(3).unwrap();
        let y = space.point_from_slice(&[0.1, -0.3, 0.2]).unwrap();
        let x = space.point_from_slice(&[0.7, 0.4, -0.5]).unwrap();
        let t = space.distance(&x, &y);
        for l in 0..=3 {
            let k = green_kernel(&solve(&space, l), &y, &x).unwrap().in_standard_frames();
            let n = k.matrix.nrows();
            let expect = DMatrix::identity(n, n) * newton_potential(3, t).unwrap();
            assert!((&k.matrix - expect).amax() < 1e-10, "degree {l}");
        }
    }

    #[test]
    fn h3_oneform_green_at_unit_distance() {
        let space = h3();
        let y = space.origin();
        let v = TangentVec { base: y.clone(), vec: DVector::from_row_slice(&[0.0, 0.6, 0.8, 0.0]) };
        let x = space.geodesic(&v, 1.0).unwrap();
        let k = green_kernel(&h3_profiles()[1], &y, &x).unwrap();
        let (alpha, beta) = h3_oneform_profile(1.0).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_row_slice(&[alpha, beta, beta]));
        assert!((&k.matrix - expect).amax() < 1e-9 * alpha);
        let k0 = green_kernel(&h3_profiles()[0], &y, &x).unwrap();
        assert!((k0.matrix[(0, 0)] / scalar_green(&space, 1.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn euclidean_codifferential_is_biot_savart() {
        let space = ModelSpace::euclidean(3).unwrap();
        let y = space.point_from_slice(&[0.2, 0.1, -0.4]).unwrap();
        let x = space.point_from_slice(&[-0.5, 0.9, 0.3]).unwrap();
        let diff = x.coords() - y.coords();
        let t = diff.norm();
        let c = 1.0 / (unit_sphere_volume(2) * t.powi(3));
        // l = 1: the scalar input 1 goes to the vector (x − y)/(4π t³)
        let k1 = codifferential_kernel(&solve(&space, 1), &y, &x).unwrap().in_standard_frames();
        assert!((k1.matrix.column(0) - &diff * c).amax() < 1e-10);
        // l = 2: v goes to (x − y) ∧ v/(4π t³)
        let k2 = codifferential_kernel(&solve(&space, 2), &y, &x).unwrap().in_standard_frames();
        for a in 0..3 {
            let e = DVector::from_fn(3, |r, _| if r == a { 1.0 } else { 0.0 });
            let mut expect = DVector::zeros(3);
            for b in 0..3 {
                expect += wedge_matrix(3, 1, b) * &e * (diff[b] * c);
            }
            assert!((k2.matrix.column(a) - expect).amax() < 1e-10);
        }
    }

    #[test]
    fn oneform_codifferential_in_h3_has_radial_correction() {
        let space = h3();
        let y = space.origin();
        let x = pt(&space, &[0.3, 0.0, 0.0]);
        let t = space.distance(&x, &y);
        let k = codifferential_kernel(&h3_profiles()[1], &y, &x).unwrap();
        let (_, da) = profile_matrices(&h3_profiles()[1], t);
        let (a, _) = profile_matrices(&h3_profiles()[1], t);
        let expect_t = -da[(0, 0)] - 2.0 * (a[(0, 0)] * t.cosh() - a[(1, 1)]) / t.sinh();
        assert!((k.matrix[(0, 0)] - expect_t).abs() < 1e-12 * expect_t.abs());
        assert!(k.matrix.rows(1, 2).amax() < 1e-14);
    }

    // Derivatives in x of ω ∘ q^A, in a frame at x0 extended by parallel
    // transport along geodesics (normal coordinates).
    fn numeric_derivatives(profile: &RadialProfile, y: &Point, x0: &Point, omega: &DVector<f64>, fy: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let space = profile.space();
        let e = space.standard_frame(x0);
        let h = 1e-4;
        let eval = |a: usize, s: f64| {
            let v = TangentVec { base: x0.clone(), vec: &e[a] * s };
            let x = space.exp(&v);
            let ex: Vec<DVector<f64>> = e.iter().map(|u| space.transport_vec(&x, x0, u)).collect();
            green_kernel(profile, y, &x).unwrap().reexpress(&ex, fy).pullback(omega)
        };
        (0..e.len())
            .map(|a| (eval(a, -2.0 * h) - eval(a, -h) * 8.0 + eval(a, h) * 8.0 - eval(a, 2.0 * h)) / (12.0 * h))
            .collect()
    }

    #[test]
    fn kernels_are_exterior_derivatives_of_green() {
        let space = h3();
        let y = pt(&space, &[0.1, -0.2, 0.15]);
        let x0 = pt(&space, &[-0.3, 0.25, 0.2]);
        let fy = space.standard_frame(&y);
        let ex = space.standard_frame(&x0);
        for l in 0..=3 {
            let profile = &h3_profiles()[l];
            let omega = DVector::from_fn(ExteriorBasis::new(3, l).len(), |i, _| 0.3 + 0.7 * i as f64);
            let grads = numeric_derivatives(profile, &y, &x0, &omega, &fy);
            let scale = grads.iter().map(|g| g.amax()).fold(0.0, f64::max);
            if l < 3 {
                let mut d = DVector::zeros(ExteriorBasis::new(3, l + 1).len());
                for (a, g) in grads.iter().enumerate() {
                    d += wedge_matrix(3, l, a) * g;
                }
                let k = differential_kernel(profile, &y, &x0).unwrap().reexpress(&ex, &fy);
                assert!((k.pullback(&omega) - &d).amax() < 1e-7 * scale, "d, degree {l}: {} vs {}", k.pullback(&omega), d);
            }
            if l > 0 {
                let mut d = DVector::zeros(ExteriorBasis::new(3, l - 1).len());
                for (a, g) in grads.iter().enumerate() {
                    d -= contraction_matrix(3, l, a) * g;
                }
                let k = codifferential_kernel(profile, &y, &x0).unwrap().reexpress(&ex, &fy);
                assert!((k.pullback(&omega) - d).amax() < 1e-7 * scale, "d*, degree {l}");
            }
        }
    }

    #[test]
    fn reexpress_round_trip_and_transpose() {
        let space = h3();
        let y = pt(&space, &[0.2, 0.1, 0.0]);
        let x = pt(&space, &[-0.1, 0.3, 0.4]);
        let k = codifferential_kernel(&h3_profiles()[2], &y, &x).unwrap();
        let back = k.in_standard_frames().reexpress(&k.frame_in, &k.frame_out);
        assert!((&back.matrix - &k.matrix).amax() < 1e-12 * k.matrix.amax());
        let tt = k.transpose().transpose();
        assert_eq!(tt.matrix, k.matrix);
        assert_eq!(k.transpose().degrees, (2, 1));
    }

    #[test]
    fn degree_bookkeeping() {
        assert_eq!(KernelKind::Differential.degrees(3, 1).unwrap(), (2, 1));
        assert_eq!(KernelKind::Codifferential.degrees(3, 1).unwrap(), (0, 1));
        assert!(KernelKind::Codifferential.degrees(3, 0).is_err());
        assert!(KernelKind::Differential.degrees(3, 3).is_err());
    }
}
