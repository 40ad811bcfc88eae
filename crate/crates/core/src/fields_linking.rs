//! Biot-Savart fields of closed loops and the Gauss linking integral in
//! three-dimensional space forms.
//!
//! Both are line integrals of the codifferential kernel `q^{d*A}` of the
//! two-form Green's profile. For a loop `K` with unit tangent `τ_K` the
//! field at `x` is the one-form `B(v) = ∮_K vol_y(τ_K ∧ q_{y,x} v) dy`, and
//!
//! `Lk(K, L) = ∮_K ∮_L vol_y(τ_L(y) ∧ q_{y,x} τ_K(x)) dy dx`.
//!
//! In Euclidean space this is the classical Gauss integral
//! `(1/4π) ∮∮ (x − y)·(τ_K × τ_L)/|x − y|³`, which is `+1` for a
//! positively linked pair under the right-hand rule.
//!
//! The topological oracle works in Cartesian coordinates, or in Poincaré-ball
//! coordinates `z = x_s/(1 + x_0)` for hyperbolic loops; this map is a
//! homeomorphism onto the unit ball, so linking numbers carry over.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel_eval::{KernelEvaluator, KernelKind};
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::radial_ode::{assemble_system, decaying_solution, GridSpec, RadialProfile, ShootingConfig};
use crate::spaceform::exterior::top_pairing;
use crate::spaceform::{Isometry, ModelSpace, Point, SpaceKind, TangentVec};

/// Point and derivative (ambient coordinates) of an analytic loop at `s ∈ [0, 1]`.
pub type LoopFn = Arc<dyn Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Polyline { vertices: Vec<Point>, lengths: Vec<f64>, dirs: Vec<DVector<f64>> },
    Analytic(LoopFn),
}

/// An oriented closed curve: a polygon of geodesic segments or a smooth
/// parametrization over `[0, 1]`.
#[derive(Clone)]
pub struct ParamLoop {
    space: ModelSpace,
    repr: Repr,
    orientation: f64,
    length: f64,
}

impl fmt::Debug for ParamLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Polyline { vertices, .. } => format!("polyline({})", vertices.len()),
            Repr::Analytic(_) => "analytic".to_string(),
        };
        f.debug_struct("ParamLoop")
            .field("space", &self.space.tag())
            .field("repr", &kind)
            .field("orientation", &self.orientation)
            .field("length", &self.length)
            .finish()
    }
}

/// A point of a loop with its oriented unit tangent and parametrization speed.
#[derive(Clone, Debug)]
pub struct LoopSample {
    pub point: Point,
    pub tangent: DVector<f64>,
    pub speed: f64,
}

const SELF_INTERSECTION_TOL: f64 = 1e-6;
const CLOSURE_TOL: f64 = 1e-9;

impl ParamLoop {
    /// Closed polygon through `points`; a repeated last point is dropped.
    pub fn polyline(space: &ModelSpace, mut points: Vec<Point>) -> Result<Self> {
        if space.dim() != 3 {
            return Err(Error::Unsupported("loops are implemented in dimension 3".into()));
        }
        if points.len() >= 2 && space.distance(&points[0], points.last().unwrap()) <= CLOSURE_TOL {
            points.pop();
        }
        if points.len() < 3 {
            return Err(Error::InvalidArgument("a closed polyline needs at least three vertices".into()));
        }
        let n = points.len();
        let mut lengths = Vec::with_capacity(n);
        let mut dirs = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (&points[i], &points[(i + 1) % n]);
            let len = space.distance(a, b);
            if !(len > 0.0) {
                return Err(Error::InvalidArgument(format!("repeated vertex {i}")));
            }
            dirs.push(space.log(a, b).vec / len);
            lengths.push(len);
        }
        let length = lengths.iter().sum();
        let out = Self { space: space.clone(), repr: Repr::Polyline { vertices: points, lengths, dirs }, orientation: 1.0, length };
        out.check_embedded()?;
        Ok(out)
    }

    /// Polyline from Cartesian (Euclidean) or Poincaré-ball (hyperbolic) coordinates.
    pub fn from_model_coords(space: &ModelSpace, coords: &[Vector3<f64>]) -> Result<Self> {
        let points = coords
            .iter()
            .map(|c| space.from_ball(&DVector::from_column_slice(c.as_slice())))
            .collect::<Result<Vec<_>>>()?;
        Self::polyline(space, points)
    }

    /// Smooth loop `s ↦ f(s)` with `f(0) = f(1)`.
    pub fn analytic(space: &ModelSpace, f: LoopFn) -> Result<Self> {
        if space.dim() != 3 {
            return Err(Error::Unsupported("loops are implemented in dimension 3".into()));
        }
        let (p0, _) = f(0.0);
        let (p1, _) = f(1.0);
        if (&p0 - &p1).amax() > CLOSURE_TOL {
            return Err(Error::InvalidArgument("analytic loop is not closed".into()));
        }
        let mut out = Self { space: space.clone(), repr: Repr::Analytic(f), orientation: 1.0, length: 0.0 };
        let gl = GaussLegendre::new(16);
        let mut length = 0.0;
        for k in 0..64 {
            let (a, b) = (k as f64 / 64.0, (k + 1) as f64 / 64.0);
            for (s, w) in gl.mapped(a, b) {
                length += w * out.sample(0, s)?.speed;
            }
        }
        out.length = length;
        Ok(out)
    }

    /// Circle `c + r(cos 2πs·u + sin 2πs·v)` in Cartesian or ball coordinates,
    /// with `u`, `v` orthonormal.
    pub fn model_circle(space: &ModelSpace, center: Vector3<f64>, radius: f64, u: Vector3<f64>, v: Vector3<f64>) -> Result<Self> {
        if (u.dot(&v)).abs() > 1e-12 || (u.norm() - 1.0).abs() > 1e-12 || (v.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("circle axes must be orthonormal".into()));
        }
        if space.is_hyperbolic() && center.norm() + radius >= 1.0 {
            return Err(Error::InvalidPoint("circle leaves the unit ball".into()));
        }
        let sp = space.clone();
        let f: LoopFn = Arc::new(move |s: f64| {
            let a = 2.0 * std::f64::consts::PI * s;
            let z = center + (u * a.cos() + v * a.sin()) * radius;
            let dz = (v * a.cos() - u * a.sin()) * (2.0 * std::f64::consts::PI * radius);
            let p = sp.from_ball(&DVector::from_column_slice(z.as_slice())).expect("inside the ball");
            let dp = sp.vec_from_ball(&p, &DVector::from_column_slice(dz.as_slice()));
            (p.into_coords(), dp)
        });
        Self::analytic(space, f)
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn is_polyline(&self) -> bool {
        matches!(self.repr, Repr::Polyline { .. })
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        Self { orientation: -self.orientation, ..self.clone() }
    }

    /// Number of smooth pieces (segments of a polyline; one for an analytic loop).
    pub fn segments(&self) -> usize {
        match &self.repr {
            Repr::Polyline { vertices, .. } => vertices.len(),
            Repr::Analytic(_) => 1,
        }
    }

    /// Parameter range of a piece: arclength for polyline segments, `[0, 1]` otherwise.
    pub fn piece_range(&self, seg: usize) -> (f64, f64) {
        match &self.repr {
            Repr::Polyline { lengths, .. } => (0.0, lengths[seg]),
            Repr::Analytic(_) => (0.0, 1.0),
        }
    }

    /// Initial quadrature panels `(piece, a, b)`; analytic loops are cut
    /// into `panels` equal parameter intervals.
    pub fn pieces(&self, panels: usize) -> Vec<(usize, f64, f64)> {
        match &self.repr {
            Repr::Polyline { lengths, .. } => lengths.iter().enumerate().map(|(i, &l)| (i, 0.0, l)).collect(),
            Repr::Analytic(_) => {
                let p = panels.max(1);
                (0..p).map(|k| (0, k as f64 / p as f64, (k + 1) as f64 / p as f64)).collect()
            }
        }
    }

    pub fn sample(&self, seg: usize, u: f64) -> Result<LoopSample> {
        match &self.repr {
            Repr::Polyline { vertices, dirs, .. } => {
                let a = vertices[seg].coords();
                let d = &dirs[seg];
                let (coords, tangent) = match self.space.kind() {
                    SpaceKind::Euclidean => (a + d * u, d.clone()),
                    SpaceKind::RealHyperbolic => (a * u.cosh() + d * u.sinh(), a * u.sinh() + d * u.cosh()),
                };
                Ok(LoopSample { point: self.space.point(coords)?, tangent: tangent * self.orientation, speed: 1.0 })
            }
            Repr::Analytic(f) => {
                let (p, dp) = f(u);
                let point = self.space.point(p)?;
                let dp = self.space.project_tangent(&point, &dp);
                let speed = self.space.norm(&dp);
                if !(speed > 0.0) {
                    return Err(Error::InvalidArgument(format!("loop parametrization is singular at s = {u}")));
                }
                Ok(LoopSample { point, tangent: dp * (self.orientation / speed), speed })
            }
        }
    }

    /// Image of the loop under an isometry.
    pub fn transformed(&self, g: &Isometry) -> Result<Self> {
        let out = match &self.repr {
            Repr::Polyline { vertices, .. } => Self::polyline(&self.space, vertices.iter().map(|p| g.apply_point(p)).collect())?,
            Repr::Analytic(f) => {
                let (f, g) = (f.clone(), g.clone());
                let h: LoopFn = Arc::new(move |s: f64| {
                    let (p, dp) = f(s);
                    (&g.linear * p + &g.translation, &g.linear * dp)
                });
                Self::analytic(&self.space, h)?
            }
        };
        Ok(Self { orientation: self.orientation, ..out })
    }

    /// Polygon through `samples` equally spaced parameter values.
    pub fn to_polyline(&self, samples: usize) -> Result<Self> {
        let out = match &self.repr {
            Repr::Polyline { .. } => self.clone(),
            Repr::Analytic(_) => {
                let pts = (0..samples).map(|k| Ok(self.sample(0, k as f64 / samples as f64)?.point)).collect::<Result<Vec<_>>>()?;
                Self { orientation: self.orientation, ..Self::polyline(&self.space, pts)? }
            }
        };
        Ok(out)
    }

    /// Vertices in Cartesian or ball coordinates, in traversal order. Each
    /// geodesic segment is subdivided `subdivide` times so that the chords
    /// follow the curve; analytic loops are sampled at `samples` points.
    pub fn model_vertices(&self, subdivide: usize, samples: usize) -> Result<Vec<Vector3<f64>>> {
        let mut out = Vec::new();
        let to3 = |p: &Point| {
            let z = self.space.to_ball(p);
            Vector3::new(z[0], z[1], z[2])
        };
        match &self.repr {
            Repr::Polyline { lengths, .. } => {
                let sub = if self.space.is_hyperbolic() { subdivide.max(1) } else { 1 };
                for (i, &len) in lengths.iter().enumerate() {
                    for k in 0..sub {
                        out.push(to3(&self.sample(i, len * k as f64 / sub as f64)?.point));
                    }
                }
            }
            Repr::Analytic(_) => {
                for k in 0..samples {
                    out.push(to3(&self.sample(0, k as f64 / samples as f64)?.point));
                }
            }
        }
        if self.orientation < 0.0 {
            out.reverse();
        }
        Ok(out)
    }

    /// Smooth perturbation by at most `delta` in model coordinates, built from
    /// the first three Fourier modes: of the vertex index for polygons, of the
    /// parameter for analytic loops.
    pub fn perturbed(&self, delta: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes: Vec<(Vector3<f64>, Vector3<f64>)> = (0..3)
            .map(|_| {
                let mut r = || Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (r(), r())
            })
            .collect();
        let total: f64 = modes.iter().map(|(a, b)| a.norm() + b.norm()).sum();
        let scale = if total > 0.0 { delta / total } else { 0.0 };
        modes.iter_mut().for_each(|(a, b)| {
            *a *= scale;
            *b *= scale;
        });
        let shift = move |s: f64| {
            let mut w = Vector3::zeros();
            let mut dw = Vector3::zeros();
            for (k, (a, b)) in modes.iter().enumerate() {
                let f = 2.0 * std::f64::consts::PI * (k + 1) as f64;
                w += a * (f * s).sin() + b * (f * s).cos();
                dw += (a * (f * s).cos() - b * (f * s).sin()) * f;
            }
            (w, dw)
        };
        match &self.repr {
            Repr::Polyline { vertices, .. } => {
                let n = vertices.len();
                let moved = vertices
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let z = self.space.to_ball(p);
                        Vector3::new(z[0], z[1], z[2]) + shift(i as f64 / n as f64).0
                    })
                    .collect::<Vec<_>>();
                let out = Self::from_model_coords(&self.space, &moved)?;
                Ok(Self { orientation: self.orientation, ..out })
            }
            Repr::Analytic(f) => {
                let (f, space) = (f.clone(), self.space.clone());
                if space.is_hyperbolic() {
                    for k in 0..256 {
                        let (p, _) = f(k as f64 / 256.0);
                        if space.to_ball(&space.point(p)?).norm() + delta >= 1.0 {
                            return Err(Error::InvalidPoint("perturbation leaves the unit ball".into()));
                        }
                    }
                }
                let g: LoopFn = Arc::new(move |s: f64| {
                    let (p, dp) = f(s);
                    let x = space.point(p).expect("loop point");
                    let (w, dw) = shift(s);
                    let z = space.to_ball(&x) + DVector::from_column_slice(w.as_slice());
                    let dz = space.vec_to_ball(&x, &dp) + DVector::from_column_slice(dw.as_slice());
                    let y = space.from_ball(&z).expect("inside the ball");
                    let dy = space.vec_from_ball(&y, &dz);
                    (y.into_coords(), dy)
                });
                let out = Self::analytic(&self.space, g)?;
                Ok(Self { orientation: self.orientation, ..out })
            }
        }
    }

    // non-adjacent segments of a polygon must stay apart
    fn check_embedded(&self) -> Result<()> {
        let v = self.model_vertices(1, 0)?;
        let n = v.len();
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let d = segment_distance(&v[i], &v[(i + 1) % n], &v[j], &v[(j + 1) % n]);
                if d < SELF_INTERSECTION_TOL {
                    return Err(Error::InvalidArgument(format!("polyline self-intersects near segments {i} and {j}")));
                }
            }
        }
        Ok(())
    }
}

/// Distance between segments `[p1, p2]` and `[q1, q2]` in `R³`.
fn segment_distance(p1: &Vector3<f64>, p2: &Vector3<f64>, q1: &Vector3<f64>, q2: &Vector3<f64>) -> f64 {
    let d1 = p2 - p1;
    let d2 = q2 - q1;
    let r = p1 - q1;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p1 + d1 * s) - (q1 + d2 * t)).norm()
}

/// Quadrature controls shared by fields and linking integrals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Initial panels for an analytic loop (polylines use one per segment).
    pub panels: usize,
    pub rtol: f64,
    pub max_depth: usize,
    /// Smallest admissible distance between curves, or from a probe to a curve.
    pub min_distance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes: 8, panels: 32, rtol: 1e-8, max_depth: 12, min_distance: 1e-3 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QuadDiagnostics {
    pub panel_pairs: usize,
    pub evaluations: usize,
    pub deepest: usize,
    pub min_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkResult {
    pub value: f64,
    pub error_estimate: f64,
    pub rounded: i64,
    pub diagnostics: QuadDiagnostics,
}

type Panel = (usize, f64, f64);

struct Nodes {
    samples: Vec<(LoopSample, f64)>,
}

fn panel_nodes(curve: &ParamLoop, p: Panel, gl: &GaussLegendre) -> Result<Nodes> {
    let samples = gl
        .mapped(p.1, p.2)
        .map(|(u, w)| {
            let s = curve.sample(p.0, u)?;
            let w = w * s.speed;
            Ok((s, w))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Nodes { samples })
}

fn halves(p: Panel) -> [Panel; 2] {
    let mid = 0.5 * (p.1 + p.2);
    [(p.0, p.1, mid), (p.0, mid, p.2)]
}

#[derive(Default)]
struct Tally {
    value: f64,
    error: f64,
    evaluations: usize,
    deepest: usize,
    min_distance: f64,
}

struct DoubleIntegral<'a, F> {
    k: &'a ParamLoop,
    l: &'a ParamLoop,
    gl: GaussLegendre,
    spec: &'a QuadratureSpec,
    integrand: F,
}

impl<F> DoubleIntegral<'_, F>
where
    F: Fn(&LoopSample, &LoopSample) -> Result<f64> + Sync,
{
    fn block(&self, pk: Panel, pl: Panel, tally: &mut Tally) -> Result<f64> {
        let nk = panel_nodes(self.k, pk, &self.gl)?;
        let nl = panel_nodes(self.l, pl, &self.gl)?;
        let space = self.k.space();
        let mut sum = 0.0;
        for (x, wx) in &nk.samples {
            for (y, wy) in &nl.samples {
                let d = space.distance(&x.point, &y.point);
                tally.min_distance = tally.min_distance.min(d);
                if d < self.spec.min_distance {
                    return Err(Error::TooClose { distance: d, guard: self.spec.min_distance });
                }
                sum += wx * wy * (self.integrand)(x, y)?;
            }
        }
        tally.evaluations += nk.samples.len() * nl.samples.len();
        Ok(sum)
    }

    fn refine(&self, pk: Panel, pl: Panel, coarse: f64, tol: f64, depth: usize, tally: &mut Tally) -> Result<()> {
        tally.deepest = tally.deepest.max(depth);
        let mut children = Vec::with_capacity(4);
        for ck in halves(pk) {
            for cl in halves(pl) {
                let v = self.block(ck, cl, tally)?;
                children.push((ck, cl, v));
            }
        }
        let fine: f64 = children.iter().map(|c| c.2).sum();
        let err = (fine - coarse).abs();
        if err <= tol || depth >= self.spec.max_depth {
            tally.value += fine;
            tally.error += err;
            return Ok(());
        }
        for (ck, cl, v) in children {
            self.refine(ck, cl, v, tol / 2.0, depth + 1, tally)?;
        }
        Ok(())
    }

    fn run(&self) -> Result<LinkResult> {
        let pk = self.k.pieces(self.spec.panels);
        let pl = self.l.pieces(self.spec.panels);
        let pairs: Vec<(Panel, Panel)> = pk.iter().flat_map(|&a| pl.iter().map(move |&b| (a, b))).collect();
        let tol = self.spec.rtol / pairs.len() as f64;
        let tallies = pairs
            .par_iter()
            .map(|&(a, b)| {
                let mut tally = Tally { min_distance: f64::INFINITY, ..Tally::default() };
                let coarse = self.block(a, b, &mut tally)?;
                self.refine(a, b, coarse, tol, 0, &mut tally)?;
                Ok(tally)
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = tallies.iter().map(|t| t.value).collect();
        let errors: Vec<f64> = tallies.iter().map(|t| t.error).collect();
        let value = pairwise_sum(&values);
        let error_estimate = pairwise_sum(&errors);
        let diagnostics = QuadDiagnostics {
            panel_pairs: pairs.len(),
            evaluations: tallies.iter().map(|t| t.evaluations).sum(),
            deepest: tallies.iter().map(|t| t.deepest).max().unwrap_or(0),
            min_distance: tallies.iter().map(|t| t.min_distance).fold(f64::INFINITY, f64::min),
        };
        if !(error_estimate <= self.spec.rtol * value.abs().max(1.0)) {
            return Err(Error::QuadratureNotConverged { value, error_estimate });
        }
        Ok(LinkResult { value, error_estimate, rounded: value.round() as i64, diagnostics })
    }
}

fn check_link_inputs(k: &ParamLoop, l: &ParamLoop, profile: Option<&RadialProfile>, guard: f64) -> Result<()> {
    if k.space() != l.space() {
        return Err(Error::InvalidArgument("loops live in different spaces".into()));
    }
    let gap = loop_distance(k, l, 4)?;
    if gap < guard {
        return Err(Error::TooClose { distance: gap, guard });
    }
    if let Some(p) = profile {
        if p.space() != k.space() || p.degree() != 2 || p.space().dim() != 3 {
            return Err(Error::InvalidArgument("linking needs the degree-2 profile of the loops' 3-dimensional space".into()));
        }
    }
    Ok(())
}

/// Two-form Green's profile of a 3-dimensional space form, obtained from the
/// one-form profile by the Hodge swap.
pub fn linking_profile(space: &ModelSpace, grid: &GridSpec) -> Result<RadialProfile> {
    if space.dim() != 3 {
        return Err(Error::Unsupported("linking is implemented in dimension 3".into()));
    }
    let system = assemble_system(space, 1)?;
    decaying_solution(&system, grid, &ShootingConfig::default())?.hodge_swap()
}

/// `vol_y(τ_L ∧ q^{d*A}_{y,x} τ_K)` for samples `x ∈ K`, `y ∈ L`.
fn linking_integrand(ev: &KernelEvaluator<'_>, space: &ModelSpace, x: &LoopSample, y: &LoopSample) -> Result<f64> {
    let k = ev.eval(&y.point, &x.point)?;
    let c = space.frame_coords(&k.frame_in, &x.tangent);
    let b = space.frame_coords(&k.frame_out, &y.tangent);
    let v = k.apply(&c);
    Ok(top_pairing(3, 1, b.as_slice(), v.as_slice()))
}

/// Gauss linking integral of `K` and `L` with the kernel of `profile` (the
/// degree-2 profile of the loops' space).
pub fn gauss_linking(k: &ParamLoop, l: &ParamLoop, profile: &RadialProfile, spec: &QuadratureSpec) -> Result<LinkResult> {
    check_link_inputs(k, l, Some(profile), spec.min_distance)?;
    let ev = KernelEvaluator::new(profile, KernelKind::Codifferential)?;
    let space = k.space().clone();
    let integral = DoubleIntegral {
        k,
        l,
        gl: GaussLegendre::new(spec.nodes),
        spec,
        integrand: |x: &LoopSample, y: &LoopSample| linking_integrand(&ev, &space, x, y),
    };
    integral.run()
}

/// The classical Gauss double integral in Euclidean 3-space, evaluated
/// directly from its formula.
pub fn gauss_integral_direct(k: &ParamLoop, l: &ParamLoop, spec: &QuadratureSpec) -> Result<LinkResult> {
    check_link_inputs(k, l, None, spec.min_distance)?;
    if k.space().kind() != SpaceKind::Euclidean {
        return Err(Error::Unsupported("the direct Gauss integral is Euclidean".into()));
    }
    let integral = DoubleIntegral {
        k,
        l,
        gl: GaussLegendre::new(spec.nodes),
        spec,
        integrand: |x: &LoopSample, y: &LoopSample| {
            let v3 = |v: &DVector<f64>| Vector3::new(v[0], v[1], v[2]);
            let r = v3(x.point.coords()) - v3(y.point.coords());
            let cross = v3(&x.tangent).cross(&v3(&y.tangent));
            Ok(r.dot(&cross) / (4.0 * std::f64::consts::PI * r.norm().powi(3)))
        },
    };
    integral.run()
}

const ORACLE_ATTEMPTS: usize = 20;
const ORACLE_SUBDIVIDE: usize = 8;
const ORACLE_SAMPLES: usize = 512;

/// Linking number from the signed crossings where `K` passes over `L` in the
/// projection along `direction`. Non-generic directions are replaced by
/// seeded random ones.
pub fn crossing_oracle(k: &ParamLoop, l: &ParamLoop, direction: Vector3<f64>) -> Result<i64> {
    check_link_inputs(k, l, None, 0.0)?;
    let vk = k.model_vertices(ORACLE_SUBDIVIDE, ORACLE_SAMPLES)?;
    let vl = l.model_vertices(ORACLE_SUBDIVIDE, ORACLE_SAMPLES)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x11c3);
    let mut d = direction;
    for _ in 0..ORACLE_ATTEMPTS {
        if d.norm() > 0.0 {
            if let Some(count) = count_crossings(&vk, &vl, &d.normalize()) {
                return Ok(count);
            }
        }
        d = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    Err(Error::NonGenericProjection(ORACLE_ATTEMPTS))
}

// None when the projection is not generic
fn count_crossings(vk: &[Vector3<f64>], vl: &[Vector3<f64>], d: &Vector3<f64>) -> Option<i64> {
    let helper = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1);
    let proj = |p: &Vector3<f64>| Vector2::new(p.dot(&e1), p.dot(&e2));
    let eps = 1e-10;
    let mut total = 0i64;
    let (nk, nl) = (vk.len(), vl.len());
    for i in 0..nk {
        let (p1, p2) = (&vk[i], &vk[(i + 1) % nk]);
        let (a1, a2) = (proj(p1), proj(p2));
        let r = a2 - a1;
        for j in 0..nl {
            let (q1, q2) = (&vl[j], &vl[(j + 1) % nl]);
            let (b1, b2) = (proj(q1), proj(q2));
            let s = b2 - b1;
            let lo = Vector2::new(a1.x.min(a2.x), a1.y.min(a2.y));
            let hi = Vector2::new(a1.x.max(a2.x), a1.y.max(a2.y));
            if b1.x.max(b2.x) < lo.x - eps || b1.x.min(b2.x) > hi.x + eps || b1.y.max(b2.y) < lo.y - eps || b1.y.min(b2.y) > hi.y + eps {
                continue;
            }
            let denom = r.perp(&s);
            let scale = r.norm() * s.norm();
            if denom.abs() <= 1e-12 * scale {
                // parallel projections: only a problem if they overlap
                if (b1 - a1).perp(&r).abs() <= eps * r.norm() {
                    return None;
                }
                continue;
            }
            let t = (b1 - a1).perp(&s) / denom;
            let u = (b1 - a1).perp(&r) / denom;
            if t < -eps || t > 1.0 + eps || u < -eps || u > 1.0 + eps {
                continue;
            }
            if t.abs() < eps || (t - 1.0).abs() < eps || u.abs() < eps || (u - 1.0).abs() < eps {
                return None;
            }
            let hk = (p1 + (p2 - p1) * t).dot(d);
            let hl = (q1 + (q2 - q1) * u).dot(d);
            if (hk - hl).abs() < eps {
                return None;
            }
            if hk > hl {
                let sign = (p2 - p1).cross(&(q2 - q1)).dot(d);
                total += if sign > 0.0 { 1 } else { -1 };
            }
        }
    }
    Some(total)
}

/// Two round circles forming a Hopf link with linking number `+1`: radius
/// `scale`, one in the xy-plane centred at `offset`, the other in the
/// xz-plane centred at `offset + (scale, 0, 0)`. Coordinates are Cartesian or
/// Poincaré-ball.
pub fn hopf_pair(space: &ModelSpace, scale: f64, offset: Vector3<f64>) -> Result<(ParamLoop, ParamLoop)> {
    let k = ParamLoop::model_circle(space, offset, scale, Vector3::x(), Vector3::y())?;
    let l = ParamLoop::model_circle(space, offset + Vector3::new(scale, 0.0, 0.0), scale, Vector3::x(), -Vector3::z())?;
    Ok((k, l))
}

fn loop_points(c: &ParamLoop, per_piece: usize) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for (seg, a, b) in c.pieces(64) {
        for i in 0..per_piece {
            out.push(c.sample(seg, a + (b - a) * i as f64 / per_piece as f64)?.point);
        }
    }
    Ok(out)
}

/// Smallest distance between `per_piece` samples per piece of each loop.
pub fn loop_distance(k: &ParamLoop, l: &ParamLoop, per_piece: usize) -> Result<f64> {
    let (pk, pl) = (loop_points(k, per_piece)?, loop_points(l, per_piece)?);
    let space = k.space();
    Ok(pk.iter().flat_map(|x| pl.iter().map(move |y| space.distance(x, y))).fold(f64::INFINITY, f64::min))
}

/// Smallest distance from `x` to `per_piece` samples per piece of the loop.
pub fn point_distance(curve: &ParamLoop, x: &Point, per_piece: usize) -> Result<f64> {
    let space = curve.space();
    Ok(loop_points(curve, per_piece)?.iter().map(|y| space.distance(x, y)).fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotopyReport {
    pub delta: f64,
    pub before: LinkResult,
    pub after: LinkResult,
    pub stable: bool,
}

/// Recomputes the linking integral after a smooth perturbation of `K` and
/// `L` of size `delta`.
pub fn isotopy_stability_check(
    k: &ParamLoop,
    l: &ParamLoop,
    profile: &RadialProfile,
    delta: f64,
    spec: &QuadratureSpec,
    seed: u64,
) -> Result<IsotopyReport> {
    let (base_k, base_l) = (k, l);
    let moved_k = base_k.perturbed(delta, seed)?;
    let moved_l = base_l.perturbed(delta, seed.wrapping_add(1))?;
    let gap = loop_distance(&moved_k, &moved_l, 4)?;
    if gap < spec.min_distance {
        return Err(Error::TooClose { distance: gap, guard: spec.min_distance });
    }
    let before = gauss_linking(base_k, base_l, profile, spec)?;
    let after = gauss_linking(&moved_k, &moved_l, profile, spec)?;
    let stable = before.rounded == after.rounded;
    Ok(IsotopyReport { delta, before, after, stable })
}

/// Field value with its quadrature error estimate (in the norm of the space).
#[derive(Clone, Debug)]
pub struct FieldValue {
    pub field: TangentVec,
    pub error_estimate: f64,
}

/// The Biot-Savart one-form of a unit current along `curve`, returned as a
/// tangent vector at `x` (its metric dual).
pub fn biot_savart_field(profile: &RadialProfile, curve: &ParamLoop, x: &Point, spec: &QuadratureSpec) -> Result<FieldValue> {
    if profile.space() != curve.space() || profile.degree() != 2 || profile.space().dim() != 3 {
        return Err(Error::InvalidArgument("the field needs the degree-2 profile of the loop's 3-dimensional space".into()));
    }
    let space = curve.space();
    let ev = KernelEvaluator::new(profile, KernelKind::Codifferential)?;
    let gl = GaussLegendre::new(spec.nodes);
    let dim = space.ambient_dim();
    let panel = |p: Panel| -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(dim);
        for (y, w) in panel_nodes(curve, p, &gl)?.samples {
            let d = space.distance(&y.point, x);
            if d < spec.min_distance {
                return Err(Error::TooClose { distance: d, guard: spec.min_distance });
            }
            let k = ev.eval(&y.point, x)?;
            let b = space.frame_coords(&k.frame_out, &y.tangent);
            for (a, e) in k.frame_in.iter().enumerate() {
                let col = k.matrix.column(a).into_owned();
                acc += e * (w * top_pairing(3, 1, b.as_slice(), col.as_slice()));
            }
        }
        Ok(acc)
    };
    let pieces = curve.pieces(spec.panels);
    let coarse: Vec<DVector<f64>> = pieces.iter().map(|&p| panel(p)).collect::<Result<_>>()?;
    let scale: f64 = coarse.iter().map(|v| space.norm(v)).sum::<f64>().max(f64::MIN_POSITIVE);
    let tol = spec.rtol * scale / pieces.len() as f64;
    fn refine<G: Fn(Panel) -> Result<DVector<f64>>>(
        panel: &G,
        p: Panel,
        coarse: DVector<f64>,
        tol: f64,
        depth: usize,
        max_depth: usize,
        norm: &dyn Fn(&DVector<f64>) -> f64,
    ) -> Result<(DVector<f64>, f64)> {
        let [a, b] = halves(p);
        let (va, vb) = (panel(a)?, panel(b)?);
        let fine = &va + &vb;
        let err = norm(&(&fine - &coarse));
        if err <= tol || depth >= max_depth {
            return Ok((fine, err));
        }
        let (ra, ea) = refine(panel, a, va, tol / 2.0, depth + 1, max_depth, norm)?;
        let (rb, eb) = refine(panel, b, vb, tol / 2.0, depth + 1, max_depth, norm)?;
        Ok((ra + rb, ea + eb))
    }
    let norm = |v: &DVector<f64>| space.norm(v);
    let mut total = DVector::zeros(dim);
    let mut error = 0.0;
    for (p, c) in pieces.into_iter().zip(coarse) {
        let (v, e) = refine(&panel, p, c, tol, 0, spec.max_depth, &norm)?;
        total += v;
        error += e;
    }
    if !(error <= spec.rtol * scale) {
        return Err(Error::QuadratureNotConverged { value: space.norm(&total), error_estimate: error });
    }
    Ok(FieldValue { field: TangentVec { base: x.clone(), vec: total }, error_estimate: error })
}

/// Divergence of the field at `x` and its size.
#[derive(Clone, Debug, Serialize)]
pub struct DivergenceSample {
    pub divergence: f64,
    pub magnitude: f64,
    /// `|div B| / |B|`.
    pub relative: f64,
}

/// Finite-difference divergence `ρ^{-3} Σ_i ∂_i(ρ³ X^i)` of the field in
/// Cartesian or ball coordinates (conformal factor `ρ = 2/(1 − |z|²)`),
/// with a fourth-order central stencil of step `h`.
pub fn field_divergence(profile: &RadialProfile, curve: &ParamLoop, x: &Point, spec: &QuadratureSpec, h: f64) -> Result<DivergenceSample> {
    let space = curve.space();
    let z0 = space.to_ball(x);
    let rho = |z: &DVector<f64>| if space.is_hyperbolic() { 2.0 / (1.0 - z.norm_squared()) } else { 1.0 };
    let flux = |z: &DVector<f64>, i: usize| -> Result<f64> {
        let p = space.from_ball(z)?;
        let b = biot_savart_field(profile, curve, &p, spec)?;
        let comp = space.vec_to_ball(&p, &b.field.vec);
        Ok(rho(z).powi(3) * comp[i])
    };
    let mut div = 0.0;
    for i in 0..3 {
        let at = |s: f64| {
            let mut z = z0.clone();
            z[i] += s * h;
            flux(&z, i)
        };
        div += (at(-2.0)? - 8.0 * at(-1.0)? + 8.0 * at(1.0)? - at(2.0)?) / (12.0 * h);
    }
    let divergence = div / rho(&z0).powi(3);
    let b = biot_savart_field(profile, curve, x, spec)?;
    let magnitude = space.norm(&b.field.vec);
    Ok(DivergenceSample { divergence, magnitude, relative: divergence.abs() / magnitude })
}
