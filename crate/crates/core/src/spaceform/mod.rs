//! Model spaces: Euclidean `ℝ^m` and real hyperbolic `H^m`.
//!
//! Hyperbolic space uses the hyperboloid model in Minkowski space
//! `ℝ^{1,m}` with `⟨x,y⟩_L = −x_0 y_0 + Σ x_i y_i`, points satisfying
//! `⟨x,x⟩_L = −1, x_0 > 0`. Geometry operations assume sectional curvature
//! `−1`; spaces built with other Jacobi eigenvalues only feed the radial ODE.

pub mod exterior;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Accepted defect of the hyperboloid constraint before renormalization.
const POINT_INPUT_TOL: f64 = 1e-6;
/// Accepted tangency defect, relative to the magnitudes involved.
const TANGENT_TOL: f64 = 1e-12;
/// Accepted deviation of a unit vector from norm one.
const UNIT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    Euclidean,
    RealHyperbolic,
}

/// A space form with its Jacobi eigenvalues `λ_i` (`i = 1..n`, `n = m − 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpace {
    kind: SpaceKind,
    dim: usize,
    jacobi: Vec<f64>,
}

/// A point in model coordinates: `m` Cartesian coordinates, or `m + 1`
/// hyperboloid coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(DVector<f64>);

/// A tangent vector in ambient coordinates together with its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVec {
    pub base: Point,
    pub vec: DVector<f64>,
}

/// Orthonormal frame `(T, m_1, …, m_n)` at `y` with `T` pointing toward `x`.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub y: Point,
    pub x: Point,
    pub t: f64,
    pub vectors: Vec<DVector<f64>>,
}

impl Point {
    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.0
    }
}

/// Volume of the unit sphere `S^n ⊂ ℝ^{n+1}`.
pub fn unit_sphere_volume(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * unit_sphere_volume(n - 2),
    }
}

/// `sinh(λt)/λ`, equal to `t` at `λ = 0`.
pub fn sinh_over(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        t
    } else {
        (lambda * t).sinh() / lambda
    }
}

fn lorentz(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    -a[0] * b[0] + a.rows(1, a.len() - 1).dot(&b.rows(1, b.len() - 1))
}

impl ModelSpace {
    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::with_eigenvalues(SpaceKind::Euclidean, dim, vec![0.0; dim.saturating_sub(1)])
    }

    pub fn hyperbolic(dim: usize) -> Result<Self> {
        Self::with_eigenvalues(SpaceKind::RealHyperbolic, dim, vec![1.0; dim.saturating_sub(1)])
    }

    /// A space with an explicit eigenvalue list. Hyperbolic spaces with
    /// `λ ≠ 1` are only meaningful for the radial ODE.
    pub fn with_eigenvalues(kind: SpaceKind, dim: usize, jacobi: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("dimension {dim} < 2")));
        }
        if jacobi.len() != dim - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} Jacobi eigenvalues, got {}",
                dim - 1,
                jacobi.len()
            )));
        }
        match kind {
            SpaceKind::Euclidean if jacobi.iter().any(|&l| l != 0.0) => {
                return Err(Error::InvalidArgument(
                    "Euclidean space has vanishing Jacobi eigenvalues".into(),
                ))
            }
            SpaceKind::RealHyperbolic if jacobi.iter().any(|&l| !(l > 0.0 && l.is_finite())) => {
                return Err(Error::InvalidArgument(
                    "hyperbolic Jacobi eigenvalues must be positive".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { kind, dim, jacobi })
    }

    /// Parses tags such as `euclidean3` or `h3`.
    pub fn from_tag(tag: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown space tag '{tag}'"));
        if let Some(rest) = tag.strip_prefix("euclidean") {
            Self::euclidean(rest.parse().map_err(|_| bad())?)
        } else if let Some(rest) = tag.strip_prefix('h') {
            Self::hyperbolic(rest.parse().map_err(|_| bad())?)
        } else {
            Err(bad())
        }
    }

    pub fn tag(&self) -> String {
        match self.kind {
            SpaceKind::Euclidean => format!("euclidean{}", self.dim),
            SpaceKind::RealHyperbolic => format!("h{}", self.dim),
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.dim - 1
    }

    pub fn jacobi_eigenvalues(&self) -> &[f64] {
        &self.jacobi
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.kind == SpaceKind::RealHyperbolic
    }

    /// All eigenvalues equal (constant curvature).
    pub fn is_space_form(&self) -> bool {
        self.jacobi.windows(2).all(|w| w[0] == w[1])
    }

    /// True for `ℝ^m` and for `H^m` with curvature exactly `−1`.
    pub fn has_unit_geometry(&self) -> bool {
        match self.kind {
            SpaceKind::Euclidean => true,
            SpaceKind::RealHyperbolic => self.jacobi.iter().all(|&l| l == 1.0),
        }
    }

    /// Common eigenvalue of a space form.
    pub fn lambda(&self) -> f64 {
        self.jacobi[0]
    }

    /// Length of ambient coordinate vectors.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            SpaceKind::Euclidean => self.dim,
            SpaceKind::RealHyperbolic => self.dim + 1,
        }
    }

    /// Volume `σ(t)` of the distance sphere of radius `t`.
    pub fn sphere_volume(&self, t: f64) -> Result<f64> {
        check_radius(t)?;
        Ok(unit_sphere_volume(self.n()) * self.jacobi.iter().map(|&l| sinh_over(l, t)).product::<f64>())
    }

    /// Mean curvature `h(t) = σ'(t)/σ(t)` of the distance sphere.
    pub fn mean_curvature(&self, t: f64) -> Result<f64> {
        check_radius(t)?;
        Ok(self
            .jacobi
            .iter()
            .map(|&l| if l == 0.0 { 1.0 / t } else { l / (l * t).tanh() })
            .sum())
    }

    /// Scalar `c` with `𝓡 = c·id` on `Λ^l`.
    pub fn curvature_operator(&self, l: usize) -> Result<f64> {
        if l > self.dim {
            return Err(Error::InvalidArgument(format!("degree {l} exceeds dimension {}", self.dim)));
        }
        if !self.is_space_form() {
            return Err(Error::Unsupported("curvature operator needs a space form".into()));
        }
        let lambda = self.lambda();
        Ok(-((self.dim - l) as f64) * l as f64 * lambda * lambda)
    }

    /// Matrix of `ad_{k_i}` on `Λ^l` in the lexicographic monomial basis.
    pub fn ad_action(&self, i: usize, l: usize) -> Result<DMatrix<f64>> {
        if i == 0 || i > self.n() {
            return Err(Error::InvalidArgument(format!("axis index {i} outside 1..={}", self.n())));
        }
        if l > self.dim {
            return Err(Error::InvalidArgument(format!("degree {l} exceeds dimension {}", self.dim)));
        }
        Ok(exterior::ad_matrix(self.dim, l, i))
    }

    fn require_unit_geometry(&self) -> Result<()> {
        if self.has_unit_geometry() {
            Ok(())
        } else {
            Err(Error::Unsupported("geometry requires curvature 0 or −1".into()))
        }
    }

    /// Validates model coordinates. Hyperboloid points within `1e−6` of the
    /// constraint are renormalized so that `x_0 = √(1 + |x_s|²)`.
    pub fn point(&self, coords: DVector<f64>) -> Result<Point> {
        self.require_unit_geometry()?;
        if coords.len() != self.ambient_dim() {
            return Err(Error::InvalidPoint(format!(
                "expected {} coordinates, got {}",
                self.ambient_dim(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        match self.kind {
            SpaceKind::Euclidean => Ok(Point(coords)),
            SpaceKind::RealHyperbolic => {
                let defect = lorentz(&coords, &coords) + 1.0;
                if coords[0] <= 0.0 || defect.abs() > POINT_INPUT_TOL * (1.0 + coords.norm_squared()) {
                    return Err(Error::InvalidPoint(format!(
                        "⟨x,x⟩_L + 1 = {defect:e}, x_0 = {}",
                        coords[0]
                    )));
                }
                Ok(Self::normalized(coords))
            }
        }
    }

    pub fn point_from_slice(&self, coords: &[f64]) -> Result<Point> {
        self.point(DVector::from_column_slice(coords))
    }

    fn normalized(mut coords: DVector<f64>) -> Point {
        let spatial = coords.rows(1, coords.len() - 1).norm_squared();
        coords[0] = (1.0 + spatial).sqrt();
        Point(coords)
    }

    pub fn origin(&self) -> Point {
        let mut c = DVector::zeros(self.ambient_dim());
        if self.is_hyperbolic() {
            c[0] = 1.0;
        }
        Point(c)
    }

    /// Metric inner product of two tangent vectors at a common point.
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => a.dot(b),
            SpaceKind::RealHyperbolic => lorentz(a, b),
        }
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Validates a tangent vector at `base`.
    pub fn tangent(&self, base: &Point, vec: DVector<f64>) -> Result<TangentVec> {
        if vec.len() != self.ambient_dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} vector components, got {}",
                self.ambient_dim(),
                vec.len()
            )));
        }
        if self.is_hyperbolic() {
            let defect = lorentz(&base.0, &vec);
            let scale = base.0.amax().max(1.0) * vec.amax().max(1.0);
            if defect.abs() > TANGENT_TOL * scale {
                return Err(Error::NotTangent(defect));
            }
        }
        Ok(TangentVec { base: base.clone(), vec })
    }

    /// Orthogonal projection of an ambient vector onto `T_x`.
    pub fn project_tangent(&self, x: &Point, v: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            SpaceKind::Euclidean => v.clone(),
            SpaceKind::RealHyperbolic => v + &x.0 * lorentz(v, &x.0),
        }
    }

    /// Unit-speed geodesic through `v.base` with initial direction `v`.
    pub fn geodesic(&self, v: &TangentVec, t: f64) -> Result<Point> {
        self.require_unit_geometry()?;
        let norm = self.norm(&v.vec);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit(norm));
        }
        self.tangent(&v.base, v.vec.clone())?;
        Ok(self.flow(&v.base, &v.vec, t))
    }

    /// Exponential map `exp_x(v)` for a tangent vector of any length.
    pub fn exp(&self, v: &TangentVec) -> Point {
        let norm = self.norm(&v.vec);
        if norm == 0.0 {
            return v.base.clone();
        }
        self.flow(&v.base, &(&v.vec / norm), norm)
    }

    fn flow(&self, x: &Point, unit: &DVector<f64>, t: f64) -> Point {
        match self.kind {
            SpaceKind::Euclidean => Point(&x.0 + unit * t),
            SpaceKind::RealHyperbolic => Self::normalized(&x.0 * t.cosh() + unit * t.sinh()),
        }
    }

    /// Geodesic distance.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => (&x.0 - &y.0).norm(),
            SpaceKind::RealHyperbolic => {
                let c = -lorentz(&x.0, &y.0);
                if c > 2.0 {
                    c.acosh()
                } else {
                    // 2 sinh(d/2) = |x − y|_L, accurate for nearby points
                    let d = &x.0 - &y.0;
                    2.0 * (lorentz(&d, &d).max(0.0).sqrt() / 2.0).asinh()
                }
            }
        }
    }

    /// `exp_y^{-1}(x)`: the tangent vector at `y` of length `d(x,y)` pointing to `x`.
    pub fn log(&self, y: &Point, x: &Point) -> TangentVec {
        let vec = match self.kind {
            SpaceKind::Euclidean => &x.0 - &y.0,
            SpaceKind::RealHyperbolic => {
                let diff = &x.0 - &y.0;
                // x + ⟨x,y⟩y written so that nearby points do not cancel
                let q = lorentz(&diff, &diff).max(0.0);
                let u = &diff - &y.0 * (q / 2.0);
                let un = lorentz(&u, &u).max(0.0).sqrt();
                if un == 0.0 {
                    u
                } else {
                    u * (self.distance(x, y) / un)
                }
            }
        };
        TangentVec { base: y.clone(), vec }
    }

    /// Parallel transport of `v ∈ T_yX` to `T_xX` along the minimizing geodesic.
    pub fn parallel_transport(&self, x: &Point, y: &Point, v: &TangentVec) -> TangentVec {
        TangentVec { base: x.clone(), vec: self.transport_vec(x, y, &v.vec) }
    }

    /// Transport of an ambient vector tangent at `y` to `x`.
    pub fn transport_vec(&self, x: &Point, y: &Point, v: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            SpaceKind::Euclidean => v.clone(),
            SpaceKind::RealHyperbolic => {
                let c = lorentz(&x.0, v) / (1.0 - lorentz(&x.0, &y.0));
                v + (&x.0 + &y.0) * c
            }
        }
    }

    /// Reference orthonormal frame at `x`: the Cartesian basis, or its image
    /// under the pure boost taking the origin to `x`.
    pub fn standard_frame(&self, x: &Point) -> Vec<DVector<f64>> {
        let m = self.dim;
        match self.kind {
            SpaceKind::Euclidean => (0..m).map(|j| DVector::from_fn(m, |r, _| if r == j { 1.0 } else { 0.0 })).collect(),
            SpaceKind::RealHyperbolic => {
                let x0 = x.0[0];
                (1..=m)
                    .map(|j| {
                        let xj = x.0[j];
                        DVector::from_fn(m + 1, |r, _| {
                            if r == 0 {
                                xj
                            } else {
                                let delta = if r == j { 1.0 } else { 0.0 };
                                delta + x.0[r] * xj / (1.0 + x0)
                            }
                        })
                    })
                    .collect()
            }
        }
    }

    /// Orientation sign (`±1`) of a frame at `x`, relative to the standard frame.
    pub fn frame_orientation(&self, x: &Point, frame: &[DVector<f64>]) -> f64 {
        let mat = match self.kind {
            SpaceKind::Euclidean => DMatrix::from_columns(frame),
            SpaceKind::RealHyperbolic => {
                let mut cols = vec![x.0.clone()];
                cols.extend(frame.iter().cloned());
                DMatrix::from_columns(&cols)
            }
        };
        mat.determinant().signum()
    }

    /// Orthonormal, positively oriented frame at `y` whose first vector points
    /// toward `x`.
    ///
    /// Completion: Gram-Schmidt over the standard frame at `y` in index order,
    /// skipping the reference vector with the largest `|⟨T, e_j⟩|`; the last
    /// vector is negated if the result is negatively oriented.
    pub fn adapted_frame(&self, y: &Point, x: &Point) -> Result<AdaptedFrame> {
        self.require_unit_geometry()?;
        let t = self.distance(x, y);
        if !(t > 0.0) {
            return Err(Error::DegeneratePair("adapted frame needs distinct points".into()));
        }
        let logv = self.log(y, x);
        let tn = self.norm(&logv.vec);
        if !(tn > 0.0) {
            return Err(Error::DegeneratePair("points numerically coincide".into()));
        }
        let tvec = logv.vec / tn;
        let reference = self.standard_frame(y);
        let pivot = (0..reference.len())
            .max_by(|&a, &b| {
                self.inner(&tvec, &reference[a])
                    .abs()
                    .partial_cmp(&self.inner(&tvec, &reference[b]).abs())
                    .unwrap()
            })
            .unwrap();
        let mut vectors = vec![tvec];
        for (j, e) in reference.iter().enumerate() {
            if j == pivot {
                continue;
            }
            let mut v = e.clone();
            for _ in 0..2 {
                for u in &vectors {
                    let c = self.inner(&v, u);
                    v -= u * c;
                }
            }
            let vn = self.norm(&v);
            vectors.push(v / vn);
        }
        if self.frame_orientation(y, &vectors) < 0.0 {
            let last = vectors.len() - 1;
            vectors[last] *= -1.0;
        }
        Ok(AdaptedFrame { y: y.clone(), x: x.clone(), t, vectors })
    }

    /// Coordinates of `v` in an orthonormal frame.
    pub fn frame_coords(&self, frame: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(frame.len(), frame.iter().map(|e| self.inner(e, v)))
    }

    /// Poincaré-ball (or Cartesian) coordinates of a point.
    pub fn to_ball(&self, x: &Point) -> DVector<f64> {
        match self.kind {
            SpaceKind::Euclidean => x.0.clone(),
            SpaceKind::RealHyperbolic => x.0.rows(1, self.dim).into_owned() / (1.0 + x.0[0]),
        }
    }

    /// Inverse of [`ModelSpace::to_ball`]: `x_0 = (1+|z|²)/(1−|z|²)`, `x_s = 2z/(1−|z|²)`.
    pub fn from_ball(&self, z: &DVector<f64>) -> Result<Point> {
        match self.kind {
            SpaceKind::Euclidean => self.point(z.clone()),
            SpaceKind::RealHyperbolic => {
                if z.len() != self.dim {
                    return Err(Error::InvalidPoint(format!("expected {} ball coordinates", self.dim)));
                }
                let r2 = z.norm_squared();
                if !(r2 < 1.0) {
                    return Err(Error::InvalidPoint("ball coordinates outside the unit ball".into()));
                }
                let mut c = DVector::zeros(self.dim + 1);
                c.rows_mut(1, self.dim).copy_from(&(z * (2.0 / (1.0 - r2))));
                Ok(Self::normalized(c))
            }
        }
    }

    /// Ball-coordinate components of a tangent vector (differential of [`ModelSpace::to_ball`]).
    pub fn vec_to_ball(&self, x: &Point, v: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            SpaceKind::Euclidean => v.clone(),
            SpaceKind::RealHyperbolic => {
                let d = 1.0 + x.0[0];
                v.rows(1, self.dim).into_owned() / d - x.0.rows(1, self.dim).into_owned() * (v[0] / (d * d))
            }
        }
    }

    /// Ambient components of a tangent vector given in ball coordinates at `x`.
    pub fn vec_from_ball(&self, x: &Point, w: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            SpaceKind::Euclidean => w.clone(),
            SpaceKind::RealHyperbolic => {
                let z = self.to_ball(x);
                let r2 = z.norm_squared();
                let s = 1.0 - r2;
                let zw = z.dot(w);
                let mut out = DVector::zeros(self.dim + 1);
                out[0] = 4.0 * zw / (s * s);
                let spatial = w * (2.0 / s) + &z * (4.0 * zw / (s * s));
                out.rows_mut(1, self.dim).copy_from(&spatial);
                out
            }
        }
    }
}

fn check_radius(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be positive, got {t}")))
    }
}

/// An orientation-preserving isometry `x ↦ Lx + b` (Lorentz transform with
/// `b = 0` in the hyperbolic case).
#[derive(Clone, Debug)]
pub struct Isometry {
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl Isometry {
    /// Samples a rigid motion or a Lorentz transform `boost ∘ rotation`
    /// with rapidity at most `max_shift`.
    pub fn random<R: Rng>(space: &ModelSpace, max_shift: f64, rng: &mut R) -> Self {
        let m = space.dim();
        let rot = random_rotation(m, rng);
        let shift = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let shift = if shift.norm() > 0.0 { &shift / shift.norm() * rng.gen_range(0.0..max_shift) } else { shift };
        match space.kind() {
            SpaceKind::Euclidean => Self { linear: rot, translation: shift },
            SpaceKind::RealHyperbolic => {
                let r = shift.norm();
                let mut target = DVector::zeros(m + 1);
                target[0] = r.cosh();
                if r > 0.0 {
                    target.rows_mut(1, m).copy_from(&(&shift * (r.sinh() / r)));
                }
                let target = Point(target);
                let mut boost = DMatrix::zeros(m + 1, m + 1);
                boost.set_column(0, target.coords());
                for (j, col) in space.standard_frame(&target).into_iter().enumerate() {
                    boost.set_column(j + 1, &col);
                }
                let mut rot_full = DMatrix::identity(m + 1, m + 1);
                rot_full.view_mut((1, 1), (m, m)).copy_from(&rot);
                Self { linear: boost * rot_full, translation: DVector::zeros(m + 1) }
            }
        }
    }

    pub fn apply_point(&self, x: &Point) -> Point {
        Point(&self.linear * &x.0 + &self.translation)
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.linear * v
    }

    pub fn apply_frame(&self, frame: &[DVector<f64>]) -> Vec<DVector<f64>> {
        frame.iter().map(|v| self.apply_vec(v)).collect()
    }
}

fn random_rotation<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let mut q = a.qr().q();
    if q.determinant() < 0.0 {
        let mut c = q.column_mut(0);
        c *= -1.0;
    }
    q
}
