//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::*;
use hypergreen::closed_kernels::ClosedForm;
use hypergreen::fields_linking::{
    crossing_oracle, field_divergence, gauss_integral_direct, gauss_linking, hopf_pair, point_distance, ParamLoop, QuadratureSpec,
};
use hypergreen::kernel_eval::{KernelEvaluator, KernelKind};
use hypergreen::radial_ode::{assemble_system, decaying_solution, GridSpec, LevinsonForm, RadialProfile, ShootingConfig};
use hypergreen::spaceform::Isometry;
use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn samples(a: f64, b: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| a + (b - a) * i as f64 / (count - 1) as f64)
}

fn max_rel(num: &[f64], reference: &[f64]) -> f64 {
    num.iter().zip(reference).map(|(a, b)| (a - b).abs() / b.abs()).fold(0.0, f64::max)
}

fn closed_form_match() -> Outcome {
    let s = space("h3");
    let start = Instant::now();
    let p = decaying_solution(&assemble_system(&s, 1).unwrap(), &GridSpec::default(), &ShootingConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let closed = ClosedForm::lookup(&s, 1).unwrap();
    let err = samples(0.1, 8.0, 800)
        .map(|t| max_rel(p.eval(t).value.as_slice(), &closed.eval(t).unwrap().0))
        .fold(0.0, f64::max);
    check(err <= 1e-6 && elapsed < Duration::from_secs(10), format!("max rel error {err:.2e}, solve {elapsed:.2?}"))
}

fn scalar_reduction() -> Outcome {
    let e3 = profile("euclidean3", 0);
    let h3 = profile("h3", 0);
    let (mut ee, mut eh) = (0.0f64, 0.0f64);
    for t in samples(0.05, 10.0, 800) {
        ee = ee.max(max_rel(e3.eval(t).value.as_slice(), &[1.0 / (4.0 * PI * t)]));
        eh = eh.max(max_rel(h3.eval(t).value.as_slice(), &[(1.0 / t.tanh() - 1.0) / (4.0 * PI)]));
    }
    check(ee <= 1e-7 && eh <= 1e-7, format!("R^3 {ee:.2e}, H^3 {eh:.2e}"))
}

fn solved_cases() -> Vec<(&'static str, usize)> {
    let mut out = Vec::new();
    for l in 0..=3 {
        out.push(("euclidean3", l));
        out.push(("h3", l));
    }
    for l in 0..=5 {
        out.push(("euclidean5", l));
    }
    for l in [0, 1, 4, 5] {
        out.push(("h5", l));
    }
    for l in [0, 1, 6, 7] {
        out.push(("h7", l));
    }
    out
}

fn singular_asymptotics() -> Outcome {
    let mut worst = (0.0f64, "", 0);
    for (tag, l) in solved_cases() {
        for r in profile(tag, l).asymptotic_ratio(1e-3) {
            if (r - 1.0).abs() > worst.0 {
                worst = ((r - 1.0).abs(), tag, l);
            }
        }
    }
    let (dev, tag, l) = worst;
    check(dev <= 5e-3, format!("{} cases, largest |ratio - 1| {dev:.2e} ({tag}, l={l})", solved_cases().len()))
}

fn euclidean_hopf() -> Outcome {
    let s = space("euclidean3");
    let (k, l) = hopf_pair(&s, 1.0, Vector3::zeros()).unwrap();
    let spec = QuadratureSpec::default();
    let direct = gauss_integral_direct(&k, &l, &spec).map_err(|e| e.to_string())?.value;
    let pipeline = gauss_linking(&k, &l, &linking("euclidean3"), &spec).map_err(|e| e.to_string())?.value;
    let ok = (direct.abs() - 1.0).abs() <= 1e-6 && (pipeline - direct.round()).abs() <= 1e-3;
    check(ok, format!("direct {direct:.12}, kernel pipeline {pipeline:.12}"))
}

fn h3_pairs() -> Vec<(&'static str, ParamLoop, ParamLoop)> {
    let s = space("h3");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let moved = |(k, l): (ParamLoop, ParamLoop), g: &Isometry| (k.transformed(g).unwrap(), l.transformed(g).unwrap());
    let (hk, hl) = hopf_pair(&s, 0.3, Vector3::new(-0.15, 0.0, 0.0)).unwrap();
    let (sk, sl) = hopf_pair(&s, 0.25, Vector3::new(-0.125, 0.0, 0.0)).unwrap();
    let g = Isometry::random(&s, 1.0, &mut rng);
    let (gk, gl) = moved((hk.clone(), hl.clone()), &g);
    let separated = (circle(&s, [-0.4, 0.0, 0.0], 0.2, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), circle(&s, [0.4, 0.0, 0.0], 0.2, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]));
    let g2 = Isometry::random(&s, 1.0, &mut rng);
    vec![
        ("hopf", hk.clone(), hl.clone()),
        ("small offset hopf", sk, sl),
        ("hopf under isometry", gk, gl),
        ("hopf, L reversed", hk.clone(), hl.reversed()),
        ("hopf as polygons", hk.to_polyline(48).unwrap(), hl.to_polyline(48).unwrap()),
        ("(2,1) torus curve", circle(&s, [0.0; 3], 0.4, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), torus_curve(&s, [0.0; 3], 0.4, 0.12, 2.0)),
        ("separated circles", separated.0.clone(), separated.1.clone()),
        ("separated under isometry", separated.0.transformed(&g2).unwrap(), separated.1.transformed(&g2).unwrap()),
        ("concentric coplanar", circle(&s, [0.0; 3], 0.2, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), circle(&s, [0.0; 3], 0.5, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])),
        ("stacked circles", circle(&s, [0.0, 0.0, -0.3], 0.3, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), circle(&s, [0.0, 0.0, 0.3], 0.3, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])),
        ("interleaved but unlinked", circle(&s, [0.0; 3], 0.25, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), circle(&s, [0.6, 0.0, 0.0], 0.2, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])),
    ]
}

fn hyperbolic_linking() -> Outcome {
    let p = linking("h3");
    let spec = QuadratureSpec::default();
    let direction = Vector3::new(0.31, -0.27, 0.91);
    let (mut linked, mut unlinked, mut failures) = (0, 0, Vec::new());
    let mut worst = (0.0f64, Duration::ZERO);
    for (name, k, l) in h3_pairs() {
        let start = Instant::now();
        let result = gauss_linking(&k, &l, &p, &spec);
        let elapsed = start.elapsed();
        let oracle = crossing_oracle(&k, &l, direction);
        match (result, oracle) {
            (Ok(r), Ok(o)) => {
                let gap = (r.value - o as f64).abs();
                worst = (worst.0.max(gap), worst.1.max(elapsed));
                if r.rounded != o || gap > 1e-2 || elapsed >= Duration::from_secs(60) {
                    failures.push(format!("{name}: {} vs oracle {o} in {elapsed:.2?}", r.value));
                } else if o == 0 {
                    unlinked += 1;
                } else {
                    linked += 1;
                }
            }
            (r, o) => failures.push(format!("{name}: {:?} / {:?}", r.err(), o.err())),
        }
    }
    let detail = format!("{linked} linked, {unlinked} unlinked, max |value - oracle| {:.2e}, slowest {:.2?}", worst.0, worst.1);
    check(failures.is_empty() && linked >= 5 && unlinked >= 5, if failures.is_empty() { detail } else { format!("{detail}; {}", failures.join("; ")) })
}

fn divergence_free() -> Outcome {
    let s = space("h3");
    let p = profile("h3", 2);
    let curve = circle(&s, [0.1, 0.0, 0.0], 0.4, [1.0, 0.0, 0.0], [0.0, 0.6, 0.8]);
    let spec = QuadratureSpec { rtol: 1e-11, ..QuadratureSpec::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1f);
    let (mut probes, mut worst) = (0, 0.0f64);
    while probes < 50 {
        let z = DVector::from_fn(3, |_, _| rng.gen_range(-0.8..0.8));
        if z.norm() > 0.8 {
            continue;
        }
        let x = s.from_ball(&z).unwrap();
        if point_distance(&curve, &x, 16).unwrap() < 0.5 {
            continue;
        }
        let d = field_divergence(&p, &curve, &x, &spec, 1e-2).map_err(|e| e.to_string())?;
        worst = worst.max(d.relative);
        probes += 1;
    }
    check(worst <= 1e-3, format!("{probes} probes, max relative divergence {worst:.2e}"))
}

fn hodge_swap_consistency() -> Outcome {
    let direct = profile("h3", 2);
    let swapped = profile("h3", 1).hodge_swap().map_err(|e| e.to_string())?;
    let err = samples(0.1, 8.0, 800)
        .map(|t| max_rel(direct.eval(t).value.as_slice(), swapped.eval(t).value.as_slice()))
        .fold(0.0, f64::max);
    check(err <= 1e-6, format!("max rel difference {err:.2e}"))
}

fn equivariance() -> Outcome {
    let cases: Vec<RadialProfile> = vec![profile("h3", 1), profile("h3", 2), profile("h5", 1), profile("euclidean3", 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(0xe9);
    let mut worst = 0.0f64;
    let mut count = 0;
    for kind in [KernelKind::Green, KernelKind::Codifferential] {
        for i in 0..100 {
            let p = &cases[i % cases.len()];
            let ev = KernelEvaluator::new(p, kind).unwrap();
            let s = p.space();
            let (x, y) = loop {
                let (x, y) = (random_point(s, &mut rng, 2.0), random_point(s, &mut rng, 2.0));
                if s.distance(&x, &y) > 0.05 {
                    break (x, y);
                }
            };
            let g = Isometry::random(s, 1.5, &mut rng);
            worst = worst.max(conjugation_defect(&ev, &g, &y, &x));
            count += 1;
        }
    }
    check(worst <= 1e-9, format!("{count} conjugations, max relative defect {worst:.2e}"))
}

fn levinson_structure() -> Outcome {
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for (tag, l) in solved_cases() {
        let s = space(tag);
        let lev = LevinsonForm::new(&assemble_system(&s, l).unwrap());
        let c = lev.constant();
        let n = s.n() as f64;
        let modes = lev.zero_modes();
        if modes.is_empty() {
            problems.push(format!("{tag} l={l}: no zero mode"));
        }
        for u in &modes {
            let d = u.len() / 2;
            worst = worst.max((c * u).amax() / u.amax());
            for i in 0..d {
                worst = worst.max((u[i] + u[d + i] / (n - 1.0)).abs());
            }
        }
        // eigenvalues of C recomputed from its Schur form
        let smallest = c.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(smallest);
    }
    check(problems.is_empty() && worst <= 1e-12, format!("{} systems, max defect {worst:.2e} {}", solved_cases().len(), problems.join("; ")))
}

fn geometry_suite() -> Outcome {
    let mut worst = [0.0f64; 6];
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e0);
    for tag in ["euclidean3", "euclidean5", "h3", "h4", "h5", "h7"] {
        let s = space(tag);
        let (ds, dh) = small_t_defects(&s, 1e-3);
        worst[0] = worst[0].max(ds).max(dh);
        for _ in 0..40 {
            let t: f64 = rng.gen_range(0.05..8.0);
            worst[1] = worst[1].max(mean_curvature_defect(&s, t));
            let (x, y) = (random_point(&s, &mut rng, 3.0), random_point(&s, &mut rng, 3.0));
            worst[2] = worst[2].max(transport_gram_defect(&s, &x, &y, &mut rng) / 16.0);
            worst[3] = worst[3].max(transport_tangent_defect(&s, &x, &y));
            let t = rng.gen_range((1e-3f64).ln()..(20f64).ln()).exp();
            worst[4] = worst[4].max(geodesic_distance_defect(&s, &x, t, &mut rng));
            if s.is_hyperbolic() && s.dim() <= 5 {
                let g = Isometry::random(&s, 1.0, &mut rng);
                worst[5] = worst[5].max(jacobi_field_defect(&s, &g, rng.gen_range(0.1..3.0)));
            }
        }
    }
    let limits = [1e-5, 1e-6, 1e-10, 1e-9, 1e-9, 1e-6];
    let names = ["small-t", "h = σ'/σ", "transport gram", "transport tangent", "geodesic distance", "jacobi"];
    let ok = worst.iter().zip(&limits).all(|(w, l)| w <= l);
    let detail = names.iter().zip(&worst).map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", ");
    check(ok, detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed-form H^3 one-form profile", closed_form_match),
        ("scalar reduction", scalar_reduction),
        ("singular asymptotics", singular_asymptotics),
        ("Euclidean Hopf link", euclidean_hopf),
        ("hyperbolic linking integers", hyperbolic_linking),
        ("divergence-free field", divergence_free),
        ("Hodge swap consistency", hodge_swap_consistency),
        ("equivariance", equivariance),
        ("Levinson structure", levinson_structure),
        ("geometry suite", geometry_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.is_ok() { "PASS" } else { "FAIL" };
        failed += outcome.is_err() as usize;
        let detail = outcome.unwrap_or_else(|e| e);
        println!("criterion {:>2} {status}  {name}: {detail} [{:.1?}]", i + 1, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
