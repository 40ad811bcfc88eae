//! `hypergreen`: solve radial Green's profiles, check them, and compute
//! Biot-Savart fields and linking numbers of curves.
//!
//! Exit codes: 0 success, 1 bad input or unsupported request, 2 a solve or
//! quadrature that did not converge (or a failed check), 3 flagged probes
//! under `field --strict`.

mod cache;
mod curves;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hypergreen::closed_kernels::ClosedForm;
use hypergreen::fields_linking::{
    biot_savart_field, crossing_oracle, field_divergence, gauss_linking, linking_profile, point_distance, LinkResult, QuadratureSpec,
};
use hypergreen::radial_ode::{assemble_system, decaying_solution, GridSpec, RadialProfile, ShootingConfig};
use hypergreen::spaceform::ModelSpace;
use hypergreen::Error;
use serde::Serialize;

use crate::curves::{from_point, parse_direction, to_point, vector_components, CurveFile};

#[derive(Parser, Debug)]
#[command(name = "hypergreen", version, about = "Radial Green's kernels, Biot-Savart fields and linking integrals")]
struct Cli {
    /// Worker threads for quadrature (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the decaying Green's profile of a space and degree.
    Solve(SolveArgs),
    /// Check a profile file against the radial equation and its asymptotics.
    Validate(ValidateArgs),
    /// Gauss linking integral of the two curves in a curve file.
    Link(LinkArgs),
    /// Biot-Savart field of a loop at probe points.
    Field(FieldArgs),
    /// Compare a solved profile with its closed form.
    CompareClosedForm(CompareArgs),
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = 1e-3)]
    tmin: f64,
    #[arg(long, default_value_t = 12.0)]
    tmax: f64,
    /// Largest grid spacing.
    #[arg(long, default_value_t = 0.02)]
    hmax: f64,
    /// Relative tolerance of the ODE integrator.
    #[arg(long, default_value_t = 1e-12)]
    ode_rtol: f64,
    /// Start of the backward integration (default 2·tmax).
    #[arg(long)]
    tfar: Option<f64>,
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec> {
        check_tolerance("ode-rtol", self.ode_rtol)?;
        if !(self.tmin < self.tmax) {
            bail!("tmin must be below tmax");
        }
        let spec = GridSpec { t_min: self.tmin, t_max: self.tmax, h_max: self.hmax, rtol: self.ode_rtol, ..GridSpec::default() };
        spec.validate()?;
        Ok(spec)
    }

    fn shooting(&self) -> ShootingConfig {
        ShootingConfig { t_far: self.tfar, ..ShootingConfig::default() }
    }
}

#[derive(Args, Debug, Clone)]
struct QuadArgs {
    /// Gauss-Legendre nodes per panel.
    #[arg(long, default_value_t = 8)]
    nodes: usize,
    /// Initial panels per analytic curve.
    #[arg(long, default_value_t = 32)]
    panels: usize,
    #[arg(long, default_value_t = 1e-8)]
    quad_rtol: f64,
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    /// Minimum admissible distance between curves and from probes to curves.
    #[arg(long, default_value_t = 1e-3)]
    min_distance: f64,
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec> {
        check_tolerance("quad-rtol", self.quad_rtol)?;
        if self.nodes == 0 || self.panels == 0 || !(self.min_distance > 0.0) {
            bail!("nodes, panels and min-distance must be positive");
        }
        Ok(QuadratureSpec {
            nodes: self.nodes,
            panels: self.panels,
            rtol: self.quad_rtol,
            max_depth: self.max_depth,
            min_distance: self.min_distance,
        })
    }
}

#[derive(Args, Debug, Clone)]
struct ProfileSource {
    /// Degree-2 profile file.
    #[arg(long, conflicts_with = "auto_solve")]
    profile: Option<PathBuf>,
    /// Solve for the profile, reusing the cache in $HYPERGREEN_CACHE.
    #[arg(long)]
    auto_solve: bool,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Space tag such as euclidean3, h3 or h5.
    #[arg(long)]
    space: String,
    #[arg(long)]
    degree: usize,
    #[command(flatten)]
    grid: GridArgs,
    /// Profile JSON destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of t against the profile components.
    #[arg(long)]
    plot_csv: Option<PathBuf>,
    /// Store the result in the profile cache.
    #[arg(long)]
    cache: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    profile: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    residual_tol: f64,
    /// Allowed deviation of the normalized asymptotic ratio from 1 at t_min.
    #[arg(long, default_value_t = 5e-3)]
    asymptotic_tol: f64,
    #[arg(long, default_value_t = 200)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct LinkArgs {
    curves: PathBuf,
    #[command(flatten)]
    source: ProfileSource,
    #[command(flatten)]
    quad: QuadArgs,
    /// Also count crossings of a planar projection.
    #[arg(long)]
    oracle: bool,
    /// Projection direction for the oracle, as x,y,z.
    #[arg(long, default_value = "0.123,0.271,0.955")]
    direction: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FieldArgs {
    curves: PathBuf,
    /// CSV of probe points (with a header row) in the curve file's model coordinates.
    #[arg(long)]
    points: PathBuf,
    /// Curve to use when the file holds several.
    #[arg(long)]
    curve: Option<String>,
    #[command(flatten)]
    source: ProfileSource,
    #[command(flatten)]
    quad: QuadArgs,
    /// Append the finite-difference divergence and its ratio to |B|.
    #[arg(long)]
    check_divergence: bool,
    /// Step of the divergence stencil in model coordinates.
    #[arg(long, default_value_t = 1e-2)]
    fd_step: f64,
    /// Exit with status 3 when any probe is flagged.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    space: String,
    #[arg(long)]
    degree: usize,
    /// Compare a stored profile instead of solving.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.1)]
    from: f64,
    #[arg(long, default_value_t = 8.0)]
    to: f64,
    #[arg(long, default_value_t = 400)]
    samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// CSV of the error against the grid spacing (hmax halved four times).
    #[arg(long)]
    history: Option<PathBuf>,
}

/// Error carrying its exit status.
#[derive(Debug)]
struct Exit {
    code: u8,
    error: anyhow::Error,
}

fn code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Integration { .. } | Error::Shooting(_) | Error::QuadratureNotConverged { .. }) => 2,
        _ => 1,
    }
}

impl From<anyhow::Error> for Exit {
    fn from(error: anyhow::Error) -> Self {
        Self { code: code_for(&error), error }
    }
}

impl From<Error> for Exit {
    fn from(error: Error) -> Self {
        anyhow::Error::from(error).into()
    }
}

type CmdResult = std::result::Result<u8, Exit>;

fn check_tolerance(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        bail!("{name} must lie in (0, 1), got {v}");
    }
    Ok(())
}

fn parse_space(tag: &str) -> Result<ModelSpace> {
    Ok(ModelSpace::from_tag(tag)?)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn solve_profile(space: &ModelSpace, degree: usize, grid: &GridSpec, shooting: &ShootingConfig) -> hypergreen::Result<RadialProfile> {
    decaying_solution(&assemble_system(space, degree)?, grid, shooting)
}

/// Largest componentwise relative difference between two profiles (or a
/// profile and a closed form) over `samples` points of `[from, to]`.
fn max_relative_difference(
    samples: usize,
    from: f64,
    to: f64,
    mut f: impl FnMut(f64) -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<(f64, f64)> {
    let mut worst = (0.0, from);
    for i in 0..samples.max(2) {
        let t = from + (to - from) * i as f64 / (samples.max(2) - 1) as f64;
        let (got, want) = f(t)?;
        for (g, w) in got.iter().zip(&want) {
            let rel = (g - w).abs() / w.abs().max(f64::MIN_POSITIVE);
            if rel > worst.0 || rel.is_nan() {
                worst = (rel, t);
            }
        }
    }
    Ok(worst)
}

fn closed_form_error(profile: &RadialProfile, cf: &ClosedForm, from: f64, to: f64, samples: usize) -> Result<(f64, f64)> {
    max_relative_difference(samples, from, to, |t| Ok((profile.eval(t).value.as_slice().to_vec(), cf.eval(t)?.0)))
}

#[derive(Serialize)]
struct SolveSummary {
    space: String,
    degree: usize,
    nodes: usize,
    probe_residual: f64,
    asymptotic_ratio: Vec<f64>,
    tail_decay_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form_max_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hodge_swap_max_rel_error: Option<f64>,
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let space = parse_space(&args.space)?;
    let grid = args.grid.spec()?;
    let shooting = args.grid.shooting();
    let profile = if args.cache {
        cache::get_or_solve(&space, args.degree, &grid, || solve_profile(&space, args.degree, &grid, &shooting))?
    } else {
        solve_profile(&space, args.degree, &grid, &shooting)?
    };
    let (from, to) = (0.1f64.max(grid.t_min), 8.0f64.min(grid.t_max));
    let closed = ClosedForm::lookup(&space, args.degree).map(|cf| closed_form_error(&profile, &cf, from, to, 400)).transpose()?;
    let m = space.dim();
    let swap = if 2 * args.degree != m {
        match solve_profile(&space, m - args.degree, &grid, &shooting) {
            Ok(other) => {
                let swapped = other.hodge_swap()?;
                Some(
                    max_relative_difference(400, from, to, |t| {
                        Ok((profile.eval(t).value.as_slice().to_vec(), swapped.eval(t).value.as_slice().to_vec()))
                    })?
                    .0,
                )
            }
            Err(_) => None,
        }
    } else {
        None
    };
    let summary = SolveSummary {
        space: space.tag(),
        degree: args.degree,
        nodes: profile.grid().len(),
        probe_residual: profile.probe_residual(200, 0),
        asymptotic_ratio: profile.asymptotic_ratio(profile.t_min()),
        tail_decay_rate: profile.tail_decay_rate(),
        closed_form_max_rel_error: closed.map(|c| c.0),
        hodge_swap_max_rel_error: swap,
    };
    eprintln!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    if let Some(path) = &args.plot_csv {
        write_profile_csv(&profile, path)?;
    }
    write_output(args.out.as_deref(), &(profile.to_json() + "\n"))?;
    Ok(0)
}

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
fn num(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-4..1e16).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn write_profile_csv(profile: &RadialProfile, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = profile.values()[0].len();
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("a{i}")));
    header.extend((0..d).map(|i| format!("da{i}")));
    w.write_record(&header)?;
    for ((t, v), dv) in profile.grid().iter().zip(profile.values()).zip(profile.derivs()) {
        let mut row = vec![num(*t)];
        row.extend(v.iter().map(|x| num(*x)));
        row.extend(dv.iter().map(|x| num(*x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ValidateReport {
    space: String,
    degree: usize,
    max_residual: f64,
    asymptotic_ratio: Vec<f64>,
    tail_decay_rate: f64,
    passed: bool,
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let text = fs::read_to_string(&args.profile).with_context(|| format!("reading {}", args.profile.display()))?;
    let profile = RadialProfile::from_json(&text)?;
    let max_residual = profile.probe_residual(args.probes, args.seed);
    let asymptotic_ratio = profile.asymptotic_ratio(profile.t_min());
    let tail_decay_rate = profile.tail_decay_rate();
    let passed = max_residual <= args.residual_tol
        && asymptotic_ratio.iter().all(|r| (r - 1.0).abs() <= args.asymptotic_tol)
        && tail_decay_rate > 0.0;
    let report = ValidateReport {
        space: profile.space().tag(),
        degree: profile.degree(),
        max_residual,
        asymptotic_ratio,
        tail_decay_rate,
        passed,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(if passed { 0 } else { 2 })
}

fn load_linking_profile(source: &ProfileSource, space: &ModelSpace) -> Result<RadialProfile> {
    match (&source.profile, source.auto_solve) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let p = RadialProfile::from_json(&text)?;
            if p.space() != space || p.degree() != 2 {
                bail!("profile is for {} degree {}, but {} degree 2 is needed", p.space().tag(), p.degree(), space.tag());
            }
            Ok(p)
        }
        (None, true) => {
            let grid = source.grid.spec()?;
            if source.grid.tfar.is_some() {
                bail!("--tfar is not used for the linking profile");
            }
            cache::get_or_solve(space, 2, &grid, || linking_profile(space, &grid))
        }
        (None, false) => bail!("pass --profile FILE or --auto-solve"),
    }
}

#[derive(Serialize)]
struct LinkOutput {
    #[serde(flatten)]
    result: LinkResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<bool>,
}

fn cmd_link(args: &LinkArgs) -> CmdResult {
    let file = CurveFile::read(&args.curves)?;
    if file.curves.len() != 2 {
        return Err(anyhow::anyhow!("link needs exactly two curves, found {}", file.curves.len()).into());
    }
    let quad = args.quad.spec()?;
    let direction = parse_direction(&args.direction)?;
    let profile = load_linking_profile(&args.source, &file.space)?;
    let (k, l) = (&file.curves[0].curve, &file.curves[1].curve);
    let result = gauss_linking(k, l, &profile, &quad)?;
    let oracle = if args.oracle { Some(crossing_oracle(k, l, direction)?) } else { None };
    let agreement = oracle.map(|o| o == result.rounded);
    let out = LinkOutput { result, oracle, agreement };
    write_output(args.out.as_deref(), &(serde_json::to_string_pretty(&out).expect("result serializes") + "\n"))?;
    Ok(if agreement == Some(false) { 2 } else { 0 })
}

fn cmd_field(args: &FieldArgs) -> CmdResult {
    let file = CurveFile::read(&args.curves)?;
    let curve = file.pick(args.curve.as_deref())?;
    let quad = args.quad.spec()?;
    if !(args.fd_step > 0.0) {
        return Err(anyhow::anyhow!("fd-step must be positive").into());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&args.points)
        .with_context(|| format!("reading {}", args.points.display()))?;
    let probes = reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.with_context(|| format!("probe row {}", i + 1))?;
            let coords = rec.iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().with_context(|| format!("probe row {}", i + 1))?;
            to_point(&file.space, file.model, &coords).with_context(|| format!("probe row {}", i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let profile = if probes.is_empty() { None } else { Some(load_linking_profile(&args.source, &file.space)?) };

    let names = file.model.coordinate_names();
    let mut header = names.clone();
    header.extend(names.iter().map(|n| format!("b_{n}")));
    header.extend(["distance".to_string(), "flagged".to_string()]);
    if args.check_divergence {
        header.extend(["divergence".to_string(), "div_relative".to_string()]);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(anyhow::Error::from)?;
    let mut flagged_any = false;
    for x in &probes {
        let profile = profile.as_ref().expect("profile loaded for non-empty probes");
        let distance = point_distance(curve, x, 32)?;
        let mut row: Vec<String> = from_point(&file.space, file.model, x).iter().map(|v| num(*v)).collect();
        let field = if distance < quad.min_distance {
            None
        } else {
            match biot_savart_field(profile, curve, x, &quad) {
                Ok(b) => Some(b),
                Err(Error::TooClose { .. }) => None,
                Err(e) => return Err(e.into()),
            }
        };
        let blank = |n: usize| std::iter::repeat(String::new()).take(n);
        match &field {
            Some(b) => row.extend(vector_components(&file.space, file.model, x, &b.field.vec).iter().map(|v| num(*v))),
            None => row.extend(blank(names.len())),
        }
        row.push(num(distance));
        row.push((field.is_none() as u8).to_string());
        flagged_any |= field.is_none();
        if args.check_divergence {
            match &field {
                Some(_) => match field_divergence(profile, curve, x, &quad, args.fd_step) {
                    Ok(d) => row.extend([num(d.divergence), num(d.relative)]),
                    Err(Error::TooClose { .. }) => row.extend(blank(2)),
                    Err(e) => return Err(e.into()),
                },
                None => row.extend(blank(2)),
            }
        }
        w.write_record(&row).map_err(anyhow::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    write_output(args.out.as_deref(), std::str::from_utf8(&bytes).expect("csv is utf-8"))?;
    Ok(if flagged_any && args.strict { 3 } else { 0 })
}

#[derive(Serialize)]
struct CompareReport {
    space: String,
    degree: usize,
    from: f64,
    to: f64,
    samples: usize,
    max_rel_error: f64,
    worst_t: f64,
    passed: bool,
}

fn cmd_compare(args: &CompareArgs) -> CmdResult {
    let space = parse_space(&args.space)?;
    let Some(cf) = ClosedForm::lookup(&space, args.degree) else {
        return Err(anyhow::anyhow!("no closed form for {} degree {}", space.tag(), args.degree).into());
    };
    if !(args.from > 0.0 && args.from < args.to) {
        return Err(anyhow::anyhow!("need 0 < from < to").into());
    }
    let grid = args.grid.spec()?;
    let shooting = args.grid.shooting();
    let profile = match &args.profile {
        Some(path) => {
            let p = RadialProfile::from_json(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?;
            if p.space() != &space || p.degree() != args.degree {
                return Err(anyhow::anyhow!("profile is for {} degree {}", p.space().tag(), p.degree()).into());
            }
            p
        }
        None => solve_profile(&space, args.degree, &grid, &shooting)?,
    };
    if args.to > profile.t_max() {
        return Err(anyhow::anyhow!("comparison range ends beyond t_max = {}", profile.t_max()).into());
    }
    let (max_rel_error, worst_t) = closed_form_error(&profile, &cf, args.from, args.to, args.samples)?;
    if let Some(path) = &args.history {
        let mut w = csv::Writer::from_path(path).map_err(anyhow::Error::from)?;
        w.write_record(["h_max", "nodes", "max_rel_error"]).map_err(anyhow::Error::from)?;
        for k in 0..4 {
            let g = GridSpec { h_max: grid.h_max * 4.0 / f64::powi(2.0, k), ..grid.clone() };
            let p = solve_profile(&space, args.degree, &g, &shooting)?;
            let (e, _) = closed_form_error(&p, &cf, args.from, args.to, args.samples)?;
            w.write_record([num(g.h_max), p.grid().len().to_string(), num(e)]).map_err(anyhow::Error::from)?;
        }
        w.flush().map_err(anyhow::Error::from)?;
    }
    let passed = max_rel_error <= args.tol;
    let report = CompareReport {
        space: space.tag(),
        degree: args.degree,
        from: args.from,
        to: args.to,
        samples: args.samples,
        max_rel_error,
        worst_t,
        passed,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(if passed { 0 } else { 2 })
}

fn run(cli: &Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().map_err(anyhow::Error::from)?;
    }
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Link(a) => cmd_link(a),
        Command::Field(a) => cmd_field(a),
        Command::CompareClosedForm(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(exit) => {
            eprintln!("error: {:#}", exit.error);
            ExitCode::from(exit.code)
        }
    }
}
