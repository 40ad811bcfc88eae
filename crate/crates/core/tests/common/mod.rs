#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use hypergreen::fields_linking::{linking_profile, LoopFn, ParamLoop};
use hypergreen::kernel_eval::KernelEvaluator;
use hypergreen::radial_ode::{assemble_system, decaying_solution, GridSpec, RadialProfile, ShootingConfig};
use hypergreen::spaceform::{Isometry, ModelSpace, Point, SpaceKind};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn space(tag: &str) -> ModelSpace {
    ModelSpace::from_tag(tag).unwrap()
}

/// Decaying profile, solved once per process. Higher odd hyperbolic
/// dimensions use a longer backward leg.
pub fn profile(tag: &str, degree: usize) -> RadialProfile {
    static CACHE: OnceLock<Mutex<HashMap<(String, usize), RadialProfile>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&(tag.to_string(), degree)) {
        return p.clone();
    }
    let s = space(tag);
    let cfg = ShootingConfig { t_far: (s.is_hyperbolic() && s.dim() >= 7).then_some(24.0), ..ShootingConfig::default() };
    let p = decaying_solution(&assemble_system(&s, degree).unwrap(), &GridSpec::default(), &cfg).unwrap();
    cache.lock().unwrap().insert((tag.to_string(), degree), p.clone());
    p
}

pub fn linking(tag: &str) -> RadialProfile {
    static CACHE: OnceLock<Mutex<HashMap<String, RadialProfile>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    cache
        .lock()
        .unwrap()
        .entry(tag.to_string())
        .or_insert_with(|| linking_profile(&space(tag), &GridSpec::default()).unwrap())
        .clone()
}

/// `exp_o(v)` for a random `v` of length at most `spread`.
pub fn random_point(s: &ModelSpace, rng: &mut ChaCha8Rng, spread: f64) -> Point {
    let o = s.origin();
    let v = random_unit(s, &o, rng) * rng.gen_range(0.0..spread);
    s.exp(&s.tangent(&o, v).unwrap())
}

pub fn random_unit(s: &ModelSpace, x: &Point, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let frame = s.standard_frame(x);
    let c: Vec<f64> = (0..frame.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = frame.iter().zip(&c).fold(DVector::zeros(s.ambient_dim()), |acc, (e, a)| acc + e * *a);
    let n = s.norm(&v);
    v / n
}

pub fn random_tangent(s: &ModelSpace, x: &Point, rng: &mut ChaCha8Rng) -> DVector<f64> {
    random_unit(s, x, rng) * rng.gen_range(0.1..2.0)
}

/// Relative defect of `q_{gy,gx} = g_* q_{y,x} g_*^{-1}`.
pub fn conjugation_defect(ev: &KernelEvaluator<'_>, g: &Isometry, y: &Point, x: &Point) -> f64 {
    let k = ev.eval(y, x).unwrap();
    let kg = ev.eval(&g.apply_point(y), &g.apply_point(x)).unwrap();
    let moved = kg.reexpress(&g.apply_frame(&k.frame_in), &g.apply_frame(&k.frame_out));
    (&moved.matrix - &k.matrix).amax() / k.matrix.amax().max(f64::MIN_POSITIVE)
}

/// Largest Gram-matrix change under transport of a random frame from `y` to `x`.
pub fn transport_gram_defect(s: &ModelSpace, x: &Point, y: &Point, rng: &mut ChaCha8Rng) -> f64 {
    let vs: Vec<DVector<f64>> = (0..s.dim()).map(|_| random_tangent(s, y, rng)).collect();
    let moved: Vec<DVector<f64>> = vs.iter().map(|v| s.transport_vec(x, y, v)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..vs.len() {
        for j in 0..vs.len() {
            let before = s.inner(&vs[i], &vs[j]);
            let after = s.inner(&moved[i], &moved[j]);
            worst = worst.max((after - before).abs());
        }
    }
    worst
}

/// Relative error of `d(x, γ(t)) = t` along a random unit-speed geodesic.
pub fn geodesic_distance_defect(s: &ModelSpace, x: &Point, t: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v = s.tangent(x, random_unit(s, x, rng)).unwrap();
    let y = s.geodesic(&v, t).unwrap();
    (s.distance(x, &y) - t).abs() / t
}

/// Relative error of `h = (log σ)'` by central differences.
pub fn mean_curvature_defect(s: &ModelSpace, t: f64) -> f64 {
    let e = 1e-5 * t;
    let fd = (s.sphere_volume(t + e).unwrap().ln() - s.sphere_volume(t - e).unwrap().ln()) / (2.0 * e);
    let h = s.mean_curvature(t).unwrap();
    (fd - h).abs() / h.abs()
}

/// Relative errors of the small-`t` expansions of `σ` and `h`.
pub fn small_t_defects(s: &ModelSpace, t: f64) -> (f64, f64) {
    let n = s.n() as i32;
    let lam2: f64 = s.jacobi_eigenvalues().iter().map(|l| l * l).sum();
    let vol = hypergreen::spaceform::unit_sphere_volume(s.n());
    let sigma = t.powi(n) * (vol + t * t / 6.0 * lam2 * vol);
    let h = n as f64 / t + t / 3.0 * lam2;
    let ds = (s.sphere_volume(t).unwrap() - sigma).abs() / s.sphere_volume(t).unwrap();
    let dh = (s.mean_curvature(t).unwrap() - h).abs() / s.mean_curvature(t).unwrap();
    (ds, dh)
}

/// Transport of the geodesic tangent at `y` towards `x` compared with the
/// tangent at `x` pointing away from `y`.
pub fn transport_tangent_defect(s: &ModelSpace, x: &Point, y: &Point) -> f64 {
    let t_y = s.log(y, x).vec;
    let t_x = s.log(x, y).vec * -1.0;
    (s.transport_vec(x, y, &t_y) - &t_x).amax() / t_x.amax()
}

/// Killing field of the rotation in the `(T, m)` plane at `p`, compared
/// with `sinh(t)·m` transported along the geodesic, and its `t`-derivative
/// with `cosh(t)·m`.
pub fn jacobi_field_defect(s: &ModelSpace, g: &Isometry, t: f64) -> f64 {
    assert_eq!(s.kind(), SpaceKind::RealHyperbolic);
    let d = s.ambient_dim();
    let rotation = |a: f64| {
        let mut r = DMatrix::identity(d, d);
        r[(1, 1)] = a.cos();
        r[(1, 2)] = -a.sin();
        r[(2, 1)] = a.sin();
        r[(2, 2)] = a.cos();
        r
    };
    let ginv = g.linear.clone().try_inverse().unwrap();
    let gamma = |t: f64| {
        let mut c = DVector::zeros(d);
        c[0] = t.cosh();
        c[1] = t.sinh();
        &g.linear * c
    };
    let stencil = |f: &dyn Fn(f64) -> DVector<f64>, c: f64, e: f64| (f(c - 2.0 * e) - f(c - e) * 8.0 + f(c + e) * 8.0 - f(c + 2.0 * e)) / (12.0 * e);
    let field = |t: f64| stencil(&|a: f64| &g.linear * rotation(a) * &ginv * gamma(t), 0.0, 1e-3);
    let p = s.point(gamma(0.0)).unwrap();
    let m = g.apply_vec(&DVector::from_fn(d, |r, _| if r == 2 { 1.0 } else { 0.0 }));
    let x = s.point(gamma(t)).unwrap();
    let transported = s.transport_vec(&x, &p, &m);
    let e1 = (field(t) - &transported * t.sinh()).amax() / transported.amax();
    let dfield = stencil(&field, t, 1e-3);
    // covariant derivative along γ is the tangential part of the ambient one
    let cov = s.project_tangent(&x, &dfield);
    let e2 = (cov - &transported * t.cosh()).amax() / transported.amax();
    e1.max(e2)
}

/// Circle in model coordinates as an analytic loop.
pub fn circle(s: &ModelSpace, c: [f64; 3], r: f64, u: [f64; 3], v: [f64; 3]) -> ParamLoop {
    let u = Vector3::from(u).normalize();
    let v = Vector3::from(v);
    let v = (v - u * u.dot(&v)).normalize();
    ParamLoop::model_circle(s, Vector3::from(c), r, u, v).unwrap()
}

/// Curve winding `turns` times around the core circle of radius `big`
/// (in the xy-plane about `c`) while going once around it; it links that
/// circle `turns` times.
pub fn torus_curve(s: &ModelSpace, c: [f64; 3], big: f64, small: f64, turns: f64) -> ParamLoop {
    let sp = s.clone();
    let f: LoopFn = Arc::new(move |u: f64| {
        let a = 2.0 * PI * u;
        let b = turns * a;
        let rad = big + small * b.cos();
        let z = Vector3::new(c[0] + rad * a.cos(), c[1] + rad * a.sin(), c[2] + small * b.sin());
        let drad = -small * turns * b.sin() * 2.0 * PI;
        let dz = Vector3::new(
            drad * a.cos() - rad * a.sin() * 2.0 * PI,
            drad * a.sin() + rad * a.cos() * 2.0 * PI,
            small * turns * b.cos() * 2.0 * PI,
        );
        let p = sp.from_ball(&DVector::from_column_slice(z.as_slice())).unwrap();
        let dp = sp.vec_from_ball(&p, &DVector::from_column_slice(dz.as_slice()));
        (p.into_coords(), dp)
    });
    ParamLoop::analytic(s, f).unwrap()
}

/// Random closed polygon near a circle, in model coordinates.
pub fn jittered_polygon(s: &ModelSpace, c: Vector3<f64>, r: f64, u: Vector3<f64>, v: Vector3<f64>, n: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Option<ParamLoop> {
    let pts: Vec<Vector3<f64>> = (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            let j = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * jitter;
            c + (u * a.cos() + v * a.sin()) * r + j
        })
        .collect();
    ParamLoop::from_model_coords(s, &pts).ok()
}
