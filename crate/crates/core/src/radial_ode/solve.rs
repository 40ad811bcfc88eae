//! Integration of the radial equation and selection of the decaying solution.
//!
//! The decaying solution is found by two-sided shooting. From `t_min` the
//! singular branch `S` and the regular series solutions `R_i` are integrated
//! forward to a matching radius. From `t_far` a basis of the decaying
//! subspace of the frozen system is integrated backward, re-orthonormalized
//! at every grid node. The full state `(A, A')` of `S + Σ c_i R_i` is then
//! matched to a combination of the backward basis.
//!
//! When the regular solutions that decay at infinity leave a one-parameter
//! freedom (degrees `0 < l < m` on `H^m`), the coefficient of the regular
//! solution with constant leading term is fixed so that the `t^0` Laurent
//! coefficient of `A` is `G_0 / dim Λ^l · id`, where `G_0` is the `t^0`
//! coefficient of the decaying scalar Green's function. On `H^3` this
//! reproduces the closed-form one-form profile. The added term is a pure
//! gauge term: it does not change the `d*A` or `dA` kernels.

use nalgebra::{DMatrix, DVector};

use super::frobenius::{self, FrobeniusSeries, DEFAULT_ORDER};
use super::profile::{RadialProfile, SolveDiagnostics};
use super::stepper::{self, StepControl};
use super::system::{assemble_system, RadialSystem};
use crate::error::{Error, Result};
use crate::spaceform::exterior::binomial;
use crate::spaceform::SpaceKind;

const FAR_QR_SPACING: f64 = 0.25;

/// Grid construction and integration tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    /// Ratio of consecutive nodes in the geometric part of the grid.
    pub ratio: f64,
    /// Largest node spacing; the grid is uniform once this is reached.
    pub h_max: f64,
    /// Relative tolerance of the step controller.
    pub rtol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { t_min: 1e-3, t_max: 12.0, ratio: 1.02, h_max: 0.02, rtol: 1e-12 }
    }
}

impl GridSpec {
    pub fn with_t_max(t_max: f64) -> Self {
        Self { t_max, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_min > 0.0
            && self.t_min <= 1e-2
            && self.t_max > self.t_min
            && self.t_max.is_finite()
            && self.ratio > 1.0
            && self.h_max > 0.0
            && self.rtol > 0.0
            && self.rtol < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid grid specification {self:?}")))
        }
    }

    /// Geometric nodes from `t_min` until the spacing reaches `h_max`, then
    /// uniform nodes ending exactly at `t_max`.
    pub fn nodes(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut nodes = vec![self.t_min];
        let mut t = self.t_min;
        loop {
            let next = t * self.ratio;
            if next - t >= self.h_max || next >= self.t_max {
                break;
            }
            nodes.push(next);
            t = next;
        }
        let count = ((self.t_max - t) / self.h_max).ceil().max(1.0) as usize;
        let h = (self.t_max - t) / count as f64;
        for i in 1..count {
            nodes.push(t + h * i as f64);
        }
        nodes.push(self.t_max);
        Ok(nodes)
    }

    fn control(&self) -> StepControl {
        StepControl { rtol: self.rtol, ..StepControl::default() }
    }
}

/// Parameters of the decaying-solution search.
#[derive(Clone, Debug, PartialEq)]
pub struct ShootingConfig {
    /// Start of the backward integration; defaults to `2·t_max`.
    pub t_far: Option<f64>,
    /// Modes of the frozen system with real part above `−threshold` count as
    /// non-decaying.
    pub growth_threshold: f64,
    /// Preferred matching radius (the nearest grid node is used).
    pub t_match: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self { t_far: None, growth_threshold: 1e-8, t_match: 1.0 }
    }
}

fn propagate(system: &RadialSystem, nodes: &[f64], y0: &DVector<f64>, ctl: &StepControl) -> Result<Vec<DVector<f64>>> {
    let f = |t: f64, y: &DVector<f64>| system.rhs(t, y);
    let mut out = Vec::with_capacity(nodes.len());
    out.push(y0.clone());
    let mut y = y0.clone();
    let mut h = (nodes.get(1).copied().unwrap_or(nodes[0]) - nodes[0]).abs() * 0.1;
    for w in nodes.windows(2) {
        let (next, last_h) = stepper::integrate(&f, w[0], &y, w[1], h, ctl)?;
        y = next;
        h = last_h;
        out.push(y.clone());
    }
    Ok(out)
}

fn split(state: &DVector<f64>, d: usize) -> (DVector<f64>, DVector<f64>) {
    (state.rows(0, d).into_owned(), state.rows(d, d).into_owned())
}

/// Integrates from user-supplied `(A, A')` at `spec.t_min` over the grid.
pub fn integrate(system: &RadialSystem, a0: &DVector<f64>, da0: &DVector<f64>, spec: &GridSpec) -> Result<RadialProfile> {
    let d = system.dim();
    if a0.len() != d || da0.len() != d {
        return Err(Error::InvalidArgument(format!("initial data must have {d} components")));
    }
    let nodes = spec.nodes()?;
    let mut y0 = DVector::zeros(2 * d);
    y0.rows_mut(0, d).copy_from(a0);
    y0.rows_mut(d, d).copy_from(da0);
    let states = propagate(system, &nodes, &y0, &spec.control())?;
    let (values, derivs) = states.iter().map(|s| split(s, d)).unzip();
    let lead = frobenius::leading_coefficient(system).unwrap_or(1.0);
    RadialProfile::new(system.clone(), nodes, values, derivs, Vec::new(), lead)
}

/// Integrates the singular branch from its Frobenius initialization.
pub fn integrate_singular(system: &RadialSystem, spec: &GridSpec) -> Result<RadialProfile> {
    spec.validate()?;
    let (a0, da0, data) = frobenius::frobenius_init(system, spec.t_min)?;
    let profile = integrate(system, &a0, &da0, spec)?;
    let mut out = RadialProfile::new(
        system.clone(),
        profile.grid().to_vec(),
        profile.values().to_vec(),
        profile.derivs().to_vec(),
        vec![data.series],
        data.leading_coeff,
    )?;
    out.diagnostics = profile.diagnostics;
    Ok(out)
}

/// The solution with the prescribed singularity at `0` that decays at infinity.
pub fn decaying_solution(system: &RadialSystem, spec: &GridSpec, cfg: &ShootingConfig) -> Result<RadialProfile> {
    spec.validate()?;
    match system.space().kind() {
        SpaceKind::Euclidean => integrate_singular(system, spec),
        SpaceKind::RealHyperbolic => {
            if !system.space().has_unit_geometry() {
                return Err(Error::Unsupported("decaying solution needs curvature −1".into()));
            }
            if !system.is_block() {
                return Err(Error::Unsupported("decaying solution is implemented for the block layout".into()));
            }
            shoot(system, spec, cfg)
        }
    }
}

struct ForwardSolution {
    series: FrobeniusSeries,
    states: Vec<DVector<f64>>,
}

fn forward(system: &RadialSystem, series: FrobeniusSeries, nodes: &[f64], ctl: &StepControl) -> Result<ForwardSolution> {
    let d = system.dim();
    let t0 = nodes[0];
    let mut y0 = DVector::zeros(2 * d);
    y0.rows_mut(0, d).copy_from(&series.value(t0));
    y0.rows_mut(d, d).copy_from(&series.deriv(t0));
    let states = propagate(system, nodes, &y0, ctl)?;
    Ok(ForwardSolution { series, states })
}

/// Orthonormal basis of the decaying subspace of the frozen first-order
/// system at `t`, and the number of non-decaying modes.
fn decaying_basis(system: &RadialSystem, t: f64, threshold: f64) -> Result<(DMatrix<f64>, usize)> {
    let m = system.first_order_matrix(t);
    let dim = m.nrows();
    let scale = m.amax().max(1.0);
    let eig = m.complex_eigenvalues();
    let mut constraints: Vec<DVector<f64>> = Vec::new();
    let mut seen: Vec<(f64, f64)> = Vec::new();
    for z in eig.iter() {
        if z.re < -threshold {
            continue;
        }
        let key = (z.re, z.im.abs());
        if seen.iter().any(|s| (s.0 - key.0).abs() < 1e-9 * scale && (s.1 - key.1).abs() < 1e-9 * scale) {
            continue;
        }
        seen.push(key);
        let mt = m.transpose();
        let op = if z.im.abs() < 1e-12 * scale {
            &mt - DMatrix::identity(dim, dim) * z.re
        } else {
            let shifted = &mt - DMatrix::identity(dim, dim) * z.re;
            &shifted * &shifted + DMatrix::identity(dim, dim) * (z.im * z.im)
        };
        constraints.extend(frobenius::null_space(&op, 1e-8 * scale));
    }
    let q = dim - constraints.len();
    if constraints.is_empty() {
        return Ok((DMatrix::identity(dim, dim), 0));
    }
    let w = DMatrix::from_fn(constraints.len(), dim, |r, c| constraints[r][c]);
    let basis = frobenius::null_space(&w, 1e-8);
    if basis.len() != q {
        return Err(Error::Shooting(format!(
            "decaying subspace has dimension {} but {} constraints were found",
            basis.len(),
            constraints.len()
        )));
    }
    Ok((DMatrix::from_columns(&basis), constraints.len()))
}

fn shoot(system: &RadialSystem, spec: &GridSpec, cfg: &ShootingConfig) -> Result<RadialProfile> {
    let d = system.dim();
    let nodes = spec.nodes()?;
    let last = nodes.len() - 1;
    let j_match = (1..last)
        .min_by(|&a, &b| (nodes[a] - cfg.t_match).abs().partial_cmp(&(nodes[b] - cfg.t_match).abs()).unwrap())
        .ok_or_else(|| Error::Shooting("grid too short for matching".into()))?;
    let t_far = cfg.t_far.unwrap_or(2.0 * spec.t_max);
    if t_far < spec.t_max {
        return Err(Error::InvalidArgument("t_far must not be below t_max".into()));
    }
    let ctl = spec.control();

    // forward side
    let (_, _, singular) = frobenius::frobenius_init(system, spec.t_min)?;
    let s = forward(system, singular.series.clone(), &nodes[..=j_match], &ctl)?;
    let leads = frobenius::regular_leads(system)?;
    let regular: Vec<ForwardSolution> = leads
        .iter()
        .map(|(r, v)| {
            let series = frobenius::series_for_radius(system, *r, v, spec.t_min, DEFAULT_ORDER)?;
            forward(system, series, &nodes[..=j_match], &ctl)
        })
        .collect::<Result<_>>()?;

    // backward side, re-orthonormalized at each node
    let (basis, _) = decaying_basis(system, t_far, cfg.growth_threshold)?;
    let q = basis.ncols();
    let f = |t: f64, y: &DVector<f64>| {
        let mut out = DVector::zeros(y.len());
        for c in 0..q {
            let col = y.rows(c * 2 * d, 2 * d).into_owned();
            out.rows_mut(c * 2 * d, 2 * d).copy_from(&system.rhs(t, &col));
        }
        out
    };
    let pack = |m: &DMatrix<f64>| DVector::from_iterator(m.len(), m.iter().copied());
    let unpack = |v: &DVector<f64>| DMatrix::from_column_slice(2 * d, q, v.as_slice());
    let mut y = pack(&basis);
    let mut h = 0.01;
    let mut t = t_far;
    // the columns align with the fastest backward-growing mode unless they
    // are re-orthonormalized regularly
    while t - spec.t_max > FAR_QR_SPACING {
        let target = t - FAR_QR_SPACING;
        let (next, last_h) = stepper::integrate(&f, t, &y, target, h, &ctl)?;
        h = last_h;
        t = target;
        y = pack(&unpack(&next).qr().q());
    }
    // stored per node from `last` down to `j_match`: (Q_j, R_j)
    let mut qr_nodes: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
    for j in (j_match..=last).rev() {
        let (next, last_h) = stepper::integrate(&f, t, &y, nodes[j], h, &ctl)?;
        h = last_h;
        t = nodes[j];
        let qr = unpack(&next).qr();
        let (qm, rm) = (qr.q(), qr.r());
        y = pack(&qm);
        qr_nodes.push((qm, rm));
    }
    qr_nodes.reverse();

    // matching: S + Σ c_i R_i = Q_J d
    let state_at = |sol: &ForwardSolution| sol.states[j_match].clone();
    let mut rhs = -state_at(&s);
    let mut fixed: Vec<Option<f64>> = vec![None; regular.len()];
    let free_count = |fixed: &[Option<f64>]| fixed.iter().filter(|c| c.is_none()).count();
    if free_count(&fixed) + q > 2 * d {
        // gauge: fix the constant-lead regular coefficient by the trace rule
        let idx = leads.iter().position(|(r, _)| *r == 0.0).ok_or_else(|| {
            Error::Shooting(format!("{} decaying modes leave the solution underdetermined", q))
        })?;
        let g0 = scalar_constant_term(system, spec, cfg)?;
        let dim_l = binomial(system.space().dim(), system.degree()) as f64;
        let v = &leads[idx].1;
        let c = g0 / dim_l / v[0];
        fixed[idx] = Some(c);
        rhs -= state_at(&regular[idx]) * c;
    }
    let unknowns = free_count(&fixed) + q;
    if unknowns > 2 * d {
        return Err(Error::Unsupported(format!(
            "non-unique decaying solution: {q} decaying modes and {} free regular solutions for {} matching conditions",
            free_count(&fixed),
            2 * d
        )));
    }
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for (i, sol) in regular.iter().enumerate() {
        if fixed[i].is_none() {
            cols.push(state_at(sol));
        }
    }
    let q_match = &qr_nodes[0].0;
    for c in 0..q {
        cols.push(-q_match.column(c).into_owned());
    }
    let mat = DMatrix::from_columns(&cols);
    let svd = mat.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e12) {
        return Err(Error::Shooting(format!("matching system is singular (condition {condition:e})")));
    }
    let sol = svd.solve(&rhs, 0.0).map_err(|e| Error::Shooting(e.to_string()))?;
    let mismatch = (&mat * &sol - &rhs).amax() / rhs.amax().max(f64::MIN_POSITIVE);
    if mismatch > 1e-8 {
        return Err(Error::Shooting(format!("no decaying solution matches the singular branch (mismatch {mismatch:e})")));
    }
    let mut coeffs = Vec::with_capacity(regular.len());
    let mut k = 0;
    for f in &fixed {
        coeffs.push(match f {
            Some(c) => *c,
            None => {
                k += 1;
                sol[k - 1]
            }
        });
    }
    let mut dvec = sol.rows(k, q).into_owned();

    // assemble node values
    let mut states: Vec<DVector<f64>> = Vec::with_capacity(nodes.len());
    for j in 0..=j_match {
        let mut st = s.states[j].clone();
        for (c, r) in coeffs.iter().zip(&regular) {
            st += &r.states[j] * *c;
        }
        states.push(st);
    }
    let forward_match = states[j_match].clone();
    let backward_match = q_match * &dvec;
    let match_residual = (&forward_match - &backward_match).amax() / forward_match.amax();
    for j in j_match + 1..=last {
        let r_prev = &qr_nodes[j - 1 - j_match].1;
        dvec = r_prev
            .clone()
            .solve_upper_triangular(&dvec)
            .ok_or_else(|| Error::Shooting("singular re-orthonormalization factor".into()))?;
        states.push(&qr_nodes[j - j_match].0 * &dvec);
    }
    let (values, derivs) = states.iter().map(|st| split(st, d)).unzip();
    let mut series = vec![s.series];
    for (c, r) in coeffs.iter().zip(&regular) {
        if *c != 0.0 {
            series.push(r.series.scaled(*c));
        }
    }
    let mut profile = RadialProfile::new(system.clone(), nodes.clone(), values, derivs, series, singular.leading_coeff)?;
    profile.diagnostics = SolveDiagnostics {
        decaying_modes: q,
        regular_coeffs: coeffs,
        t_match: nodes[j_match],
        match_condition: condition,
        match_residual,
    };
    Ok(profile)
}

/// `t^0` Laurent coefficient of the decaying scalar Green's function.
fn scalar_constant_term(system: &RadialSystem, spec: &GridSpec, cfg: &ShootingConfig) -> Result<f64> {
    let scalar = assemble_system(system.space(), 0)?;
    let profile = shoot(&scalar, spec, cfg)?;
    let leads = frobenius::regular_leads(&scalar)?;
    let idx = leads.iter().position(|(r, _)| *r == 0.0).expect("constant solution");
    Ok(profile.diagnostics.regular_coeffs[idx] * leads[idx].1[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_kernels::{h3_oneform_profile, scalar_green};
    use crate::spaceform::ModelSpace;
    use std::f64::consts::PI;

    #[test]
    fn grid_shape() {
        let spec = GridSpec::default();
        let nodes = spec.nodes().unwrap();
        assert_eq!(nodes[0], 1e-3);
        assert_eq!(*nodes.last().unwrap(), 12.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= spec.h_max * (1.0 + 1e-12)));
        assert!(GridSpec { t_min: 0.1, ..spec.clone() }.nodes().is_err());
    }

    #[test]
    fn euclidean_newton_potential() {
        let sys = assemble_system(&ModelSpace::euclidean(3).unwrap(), 0).unwrap();
        let profile = integrate_singular(&sys, &GridSpec::default()).unwrap();
        for (t, v) in profile.grid().iter().zip(profile.values()) {
            let exact = 1.0 / (4.0 * PI * t);
            assert!((v[0] / exact - 1.0).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn h3_scalar_singular_branch_flux() {
        let sys = assemble_system(&ModelSpace::hyperbolic(3).unwrap(), 0).unwrap();
        let profile = integrate_singular(&sys, &GridSpec::with_t_max(8.0)).unwrap();
        for (t, dv) in profile.grid().iter().zip(profile.derivs()) {
            let exact = -1.0 / (4.0 * PI * t.sinh().powi(2));
            assert!((dv[0] / exact - 1.0).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn h3_scalar_decaying() {
        let space = ModelSpace::hyperbolic(3).unwrap();
        let sys = assemble_system(&space, 0).unwrap();
        let profile = decaying_solution(&sys, &GridSpec::default(), &ShootingConfig::default()).unwrap();
        assert_eq!(profile.diagnostics.decaying_modes, 1);
        for &t in &[0.01, 0.1, 1.0, 4.0, 8.0] {
            let v = profile.eval(t).value[0];
            let exact = scalar_green(&space, t).unwrap();
            assert!((v / exact - 1.0).abs() < 1e-8, "t = {t}: {v} vs {exact}");
        }
    }

    #[test]
    fn h3_oneform_decaying() {
        let sys = assemble_system(&ModelSpace::hyperbolic(3).unwrap(), 1).unwrap();
        let profile = decaying_solution(&sys, &GridSpec::default(), &ShootingConfig::default()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=79 {
            let t = 0.1 + 0.1 * i as f64;
            let (alpha, beta) = h3_oneform_profile(t).unwrap();
            let v = profile.eval(t).value;
            worst = worst.max((v[0] / alpha - 1.0).abs()).max((v[1] / beta - 1.0).abs());
        }
        assert!(worst < 1e-6, "worst relative error {worst:e}");
        assert!(profile.probe_residual(100, 3) < 1e-6);
    }

    #[test]
    fn complementary_degrees_agree_on_h7() {
        let space = ModelSpace::hyperbolic(7).unwrap();
        let cfg = ShootingConfig { t_far: Some(24.0), ..ShootingConfig::default() };
        let spec = GridSpec::default();
        let a = decaying_solution(&assemble_system(&space, 1).unwrap(), &spec, &cfg).unwrap();
        let b = decaying_solution(&assemble_system(&space, 6).unwrap(), &spec, &cfg).unwrap().hodge_swap().unwrap();
        for &t in &[0.2, 1.0, 3.0, 6.0, 10.0] {
            let (x, y) = (a.eval(t).value, b.eval(t).value);
            assert!((&x - &y).amax() < 1e-7 * x.amax(), "t = {t}");
        }
        // the slowest decaying mode is e^{-t}
        let ratio = a.eval(11.0).value.amax() / a.eval(10.0).value.amax();
        assert!((ratio.ln() + 1.0).abs() < 1e-2);
    }

    #[test]
    fn rejects_non_unique_degrees() {
        let sys = assemble_system(&ModelSpace::hyperbolic(5).unwrap(), 2).unwrap();
        let err = decaying_solution(&sys, &GridSpec::default(), &ShootingConfig::default());
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }
}
