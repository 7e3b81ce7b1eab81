//! Command-line front end. Exit status: 0 on success, 2 when a check fails
//! or a computation does not succeed, 1 on usage errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::json;

use crate::compare::{frechet_distance, sup_distance, CompareMetric, FrechetOptions};
use crate::config::{load_model, LoadedModel};
use crate::connect::{connect_points, ShootingProblem};
use crate::cr::{burns_shnider_scalar, pluriharmonic_warning, tw_scalar_curvature};
use crate::equivalence::{blowup_probe, closed_form_connection, log_spaced, pregeodesic_residual, projective_shift, shift_trace_distance};
use crate::error::{Error, Result};
use crate::euler_lagrange::{integrate_geodesic, Gauge, TraceOptions};
use crate::expr::parse_expr;
use crate::geometry::{eval_f, sample_indicatrix_capped, CovectorField, KropinaStructure};
use crate::io::{manifest_path, read_trajectory, write_trajectory, RunManifest, SeedState};
use crate::lift::{lift_trace, LiftOptions};
use crate::ode::Tolerances;
use crate::trajectory::Trajectory;

/// Environment variable read for the worker thread count.
pub const THREADS_ENV: &str = "KROPINA_THREADS";

#[derive(Parser, Debug)]
#[command(name = "kropina", version, about = "Kropina geodesics, CR chains and Fefferman-lift checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a geodesic from the Euler-Lagrange system.
    Trace(TraceArgs),
    /// Integrate the null lift and project it.
    LiftTrace(LiftArgs),
    /// Compare two trajectory files.
    Compare(CompareArgs),
    /// Join two points by a geodesic.
    Connect(ConnectArgs),
    /// Sample the indicatrix and check F = 1.
    Indicatrix(IndicatrixArgs),
    /// Scalar curvature of a rescaled CR model.
    Curvature(CurvatureArgs),
    /// Acceleration blow-up as the velocity approaches ker ω.
    Blowup(BlowupArgs),
    /// Trace equivalence under F -> cF + β, or the closed-form connection check.
    Equiv(EquivArgs),
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Catalog id (heisenberg:n, burns-shnider:n, euclidean:n, rescaled:n:<expr>) or a config file.
    #[arg(long)]
    model: String,
}

#[derive(Args, Debug, Clone, Copy)]
struct TolArgs {
    #[arg(long, default_value_t = 1e-9)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
}

impl TolArgs {
    fn get(&self) -> Tolerances {
        Tolerances::new(self.rtol, self.atol)
    }
}

/// Comma-separated numbers, e.g. `0.1,-2,3e-4`.
#[derive(Clone, Debug)]
struct Coords(Vec<f64>);

fn parse_vec(s: &str) -> std::result::Result<Coords, String> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"))).collect::<std::result::Result<_, _>>().map(Coords)
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    point: Coords,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    dir: Coords,
    #[arg(long, default_value = "omega-const")]
    gauge: Gauge,
    #[arg(long, default_value_t = 1.0)]
    tmax: f64,
    #[command(flatten)]
    tol: TolArgs,
    /// Uniform output spacing; every accepted step when omitted.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LiftArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    point: Coords,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    dir: Coords,
    #[arg(long, default_value_t = 1.0)]
    tmax: f64,
    #[command(flatten)]
    tol: TolArgs,
    #[arg(long)]
    dt: Option<f64>,
    /// Bound on momentum drift and null defect.
    #[arg(long, default_value_t = 1e-8)]
    check_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value = "sup")]
    metric: CompareMetric,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Traverse the second trace backwards (Fréchet only).
    #[arg(long)]
    reverse: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConnectArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    from: Coords,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    to: Coords,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IndicatrixArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    point: Coords,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = crate::geometry::DEFAULT_CAP)]
    cap: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvatureArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    point: Coords,
    /// Tolerance for the Burns-Shnider closed form and the pluriharmonic test.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BlowupArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    point: Coords,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    xi0: Coords,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    v: Coords,
    #[arg(long, default_value_t = 1e-1)]
    smax: f64,
    #[arg(long, default_value_t = 1e-4)]
    smin: f64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Expected exponent; checked when given.
    #[arg(long, allow_hyphen_values = true)]
    expect: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EquivArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    point: Coords,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    dir: Coords,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    scale: f64,
    /// Potential f with β = df, over the model's coordinate names.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Check the closed-form connection instead of a projective shift.
    #[arg(long)]
    connection: bool,
    #[arg(long, default_value_t = 1.0)]
    tmax: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[command(flatten)]
    tols: TolArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Pass,
    CheckFailed(String),
}

/// Runs the command line and returns the exit status.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command, argv) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                1
            } else {
                2
            }
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Syntax { .. } | Error::UnknownSymbol { .. } | Error::DimensionMismatch(_) | Error::InvalidInput(_) | Error::Io(_)
    )
}

fn dispatch(cmd: Command, argv: &[String]) -> Result<Outcome> {
    match cmd {
        Command::Trace(a) => cmd_trace(a, argv),
        Command::LiftTrace(a) => cmd_lift(a, argv),
        Command::Compare(a) => cmd_compare(a, argv),
        Command::Connect(a) => cmd_connect(a, argv),
        Command::Indicatrix(a) => cmd_indicatrix(a, argv),
        Command::Curvature(a) => cmd_curvature(a, argv),
        Command::Blowup(a) => cmd_blowup(a, argv),
        Command::Equiv(a) => cmd_equiv(a, argv),
    }
}

fn vector(s: &KropinaStructure, v: &[f64], what: &str) -> Result<DVector<f64>> {
    if v.len() != s.dim() {
        return Err(Error::DimensionMismatch(format!("--{what} has {} entries, model dimension is {}", v.len(), s.dim())));
    }
    Ok(DVector::from_column_slice(v))
}

fn manifest_for(command: &str, argv: &[String], model: &str, loaded: Option<&LoadedModel>) -> RunManifest {
    let mut m = RunManifest::new(command, argv, model);
    if let Some(l) = loaded {
        m.model_config = l.config.clone();
    }
    m
}

fn finish_trajectory(mut m: RunManifest, traj: &Trajectory, out: &Path) -> Result<()> {
    write_trajectory(traj, out)?;
    m.add_output(out)?;
    m.terminations.push(traj.meta.termination.clone());
    m.write(&manifest_path(out))
}

fn write_report(mut m: RunManifest, report: serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    match out {
        Some(path) => {
            std::fs::write(path, text + "\n")?;
            m.add_output(path)?;
            m.report = report;
            m.write(&manifest_path(path))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_trace(a: TraceArgs, argv: &[String]) -> Result<Outcome> {
    let loaded = load_model(&a.model.model)?;
    let s = &loaded.structure;
    let x = vector(s, &a.point.0, "point")?;
    let xi = vector(s, &a.dir.0, "dir")?;
    let mut opts = TraceOptions::new(a.gauge, a.tmax);
    opts.tol = a.tol.get();
    opts.output_step = a.dt;
    let traj = integrate_geodesic(s, &x, &xi, &opts)?;
    let mut m = manifest_for("trace", argv, &a.model.model, Some(&loaded));
    m.seeds.push(SeedState { x: a.point.0.clone(), xi: a.dir.0.clone() });
    m.gauge = Some(a.gauge);
    m.tolerances = Some(opts.tol);
    m.report = json!({ "samples": traj.len(), "stats": traj.meta.stats });
    finish_trajectory(m, &traj, &a.out)?;
    Ok(Outcome::Pass)
}

fn cmd_lift(a: LiftArgs, argv: &[String]) -> Result<Outcome> {
    let loaded = load_model(&a.model.model)?;
    let s = &loaded.structure;
    let x = vector(s, &a.point.0, "point")?;
    let xi = vector(s, &a.dir.0, "dir")?;
    let opts = LiftOptions { tol: a.tol.get(), t_max: a.tmax, output_step: a.dt, ..Default::default() };
    let (lt, proj) = lift_trace(s, &x, &xi, &opts)?;
    let drift = lt.momentum_drift();
    let null = lt.max_null_defect();
    let mut m = manifest_for("lift-trace", argv, &a.model.model, Some(&loaded));
    m.seeds.push(SeedState { x: a.point.0.clone(), xi: a.dir.0.clone() });
    m.gauge = Some(Gauge::OmegaConstant);
    m.tolerances = Some(opts.tol);
    m.report = json!({ "momentum_drift": drift, "max_null_defect": null, "stats": lt.meta.stats });
    finish_trajectory(m, &proj, &a.out)?;
    if drift > a.check_tol || null > a.check_tol {
        return Ok(Outcome::CheckFailed(format!("momentum drift {drift:e}, null defect {null:e}")));
    }
    Ok(Outcome::Pass)
}

fn cmd_compare(a: CompareArgs, argv: &[String]) -> Result<Outcome> {
    let ta = read_trajectory(&a.a)?;
    let tb = read_trajectory(&a.b)?;
    let d = match a.metric {
        CompareMetric::Sup => sup_distance(&ta, &tb)?,
        CompareMetric::Frechet => {
            frechet_distance(&ta, &tb, &FrechetOptions { reverse_second: a.reverse, ..Default::default() })?
        }
    };
    println!("{} distance {d:.6e} (tol {:.1e})", a.metric, a.tol);
    let report = json!({ "metric": a.metric, "distance": d, "tol": a.tol, "pass": d <= a.tol });
    let m = manifest_for("compare", argv, "", None);
    write_report(m, report, a.out.as_deref())?;
    if d <= a.tol {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::CheckFailed(format!("{} distance {d:e} exceeds {:e}", a.metric, a.tol)))
    }
}

fn cmd_connect(a: ConnectArgs, argv: &[String]) -> Result<Outcome> {
    let loaded = load_model(&a.model.model)?;
    let s = &loaded.structure;
    let p = vector(s, &a.from.0, "from")?;
    let q = vector(s, &a.to.0, "to")?;
    let mut prob = ShootingProblem::new(s.clone(), p, q)?;
    prob.endpoint_tol = a.tol;
    if let Some(b) = a.budget {
        prob.budget = b;
    }
    if let Some(g) = a.grid {
        prob.grid = g;
    }
    if let Some(t) = a.tmax {
        prob.t_max = t;
    }
    let c = connect_points(&prob)?;
    println!("length {:.12e}, endpoint residual {:.3e}", c.length, c.residual);
    let mut m = manifest_for("connect", argv, &a.model.model, Some(&loaded));
    m.seeds.push(SeedState { x: a.from.0.clone(), xi: c.initial_velocity.as_slice().to_vec() });
    m.gauge = Some(Gauge::FArclength);
    m.tolerances = Some(crate::connect::SHOT_TOL);
    m.report = json!({
        "length": c.length,
        "residual": c.residual,
        "t_end": c.t_end,
        "params": c.params,
        "modification": c.modification.as_ref().map(|f| f.display(&crate::cr::coordinate_names((s.dim() - 1) / 2)).to_string()),
        "solutions": c.solutions,
        "refinements": c.refinements,
        "grid": prob.grid,
        "delta_cap": prob.delta_cap,
    });
    finish_trajectory(m, &c.trajectory, &a.out)?;
    Ok(Outcome::Pass)
}

fn cmd_indicatrix(a: IndicatrixArgs, argv: &[String]) -> Result<Outcome> {
    let loaded = load_model(&a.model.model)?;
    let s = &loaded.structure;
    let x = vector(s, &a.point.0, "point")?;
    let vs = sample_indicatrix_capped(s, &x, a.samples, a.cap)?;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(vs.len());
    for v in &vs {
        let f = eval_f(s, &x, v)?;
        worst = worst.max((f - 1.0).abs());
        rows.push(json!({ "v": v.as_slice(), "F": f, "omega_v": s.oneform(&x).dot(v) }));
    }
    println!("{} samples, max |F - 1| = {worst:.3e}", vs.len());
    let report = json!({ "samples": rows, "max_deviation": worst, "tol": a.tol });
    let mut m = manifest_for("indicatrix", argv, &a.model.model, Some(&loaded));
    m.seeds.push(SeedState { x: a.point.0.clone(), xi: Vec::new() });
    write_report(m, report, a.out.as_deref())?;
    if worst <= a.tol {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::CheckFailed(format!("max |F - 1| = {worst:e}")))
    }
}

fn cmd_curvature(a: CurvatureArgs, argv: &[String]) -> Result<Outcome> {
    let loaded = load_model(&a.model.model)?;
    let spec = loaded
        .cr
        .clone()
        .ok_or_else(|| Error::InvalidInput(format!("model `{}` is not a CR model", a.model.model)))?;
    if a.point.0.len() != 2 * spec.n + 1 {
        return Err(Error::DimensionMismatch(format!("--point needs {} entries", 2 * spec.n + 1)));
    }
    let r = tw_scalar_curvature(&spec, &a.point.0)?;
    let mut m = manifest_for("curvature", argv, &a.model.model, Some(&loaded));
    if let Some(w) = pluriharmonic_warning(&spec, &a.point.0, a.tol) {
        eprintln!("warning: {w}");
        m.warnings.push(w);
    }
    let closed = if a.model.model.starts_with("burns-shnider:") { Some(burns_shnider_scalar(spec.n, &a.point.0)?) } else { None };
    println!("scalar curvature {r:.15e}");
    let report = json!({ "point": a.point.0, "scalar_curvature": r, "closed_form": closed });
    m.seeds.push(SeedState { x: a.point.0.clone(), xi: Vec::new() });
    write_report(m, report, a.out.as_deref())?;
    match closed {
        Some(c) if (c - r).abs() > a.tol * c.abs().max(1.0) => Ok(Outcome::CheckFailed(format!("closed form {c:e} vs {r:e}"))),
        _ => Ok(Outcome::Pass),
    }
}

fn cmd_blowup(a: BlowupArgs, argv: &[String]) -> Result<Outcome> {
    let loaded = load_model(&a.model.model)?;
    let s = &loaded.structure;
    let x = vector(s, &a.point.0, "point")?;
    let xi0 = vector(s, &a.xi0.0, "xi0")?;
    let v = vector(s, &a.v.0, "v")?;
    let report = blowup_probe(s, &x, &xi0, &v, &log_spaced(a.smax, a.smin, a.count))?;
    println!("fitted exponent {:.4}", report.fitted_exponent);
    let mut m = manifest_for("blowup", argv, &a.model.model, Some(&loaded));
    m.seeds.push(SeedState { x: a.point.0.clone(), xi: a.xi0.0.clone() });
    let exponent = report.fitted_exponent;
    write_report(m, serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?, a.out.as_deref())?;
    match a.expect {
        Some(e) if (exponent - e).abs() > a.tol => Ok(Outcome::CheckFailed(format!("exponent {exponent} vs expected {e}"))),
        _ => Ok(Outcome::Pass),
    }
}

fn model_names(loaded: &LoadedModel) -> Vec<String> {
    let n = loaded.structure.dim();
    if let Some(spec) = &loaded.cr {
        return crate::cr::coordinate_names(spec.n);
    }
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn cmd_equiv(a: EquivArgs, argv: &[String]) -> Result<Outcome> {
    let loaded = load_model(&a.model.model)?;
    let s = &loaded.structure;
    let x = vector(s, &a.point.0, "point")?;
    let xi = vector(s, &a.dir.0, "dir")?;
    let mut opts = TraceOptions::new(Gauge::OmegaConstant, a.tmax);
    opts.tol = a.tols.get();
    let mut m = manifest_for("equiv", argv, &a.model.model, Some(&loaded));
    m.seeds.push(SeedState { x: a.point.0.clone(), xi: a.dir.0.clone() });
    m.gauge = Some(Gauge::OmegaConstant);
    m.tolerances = Some(opts.tol);
    if a.connection {
        let traj = integrate_geodesic(s, &x, &xi, &opts)?;
        let r = pregeodesic_residual(&traj, |p| closed_form_connection(s, p))?;
        println!("pregeodesic residual {r:.3e}");
        write_report(m, json!({ "pregeodesic_residual": r, "tol": a.tol }), a.out.as_deref())?;
        return Ok(if r <= a.tol { Outcome::Pass } else { Outcome::CheckFailed(format!("residual {r:e}")) });
    }
    let beta = match &a.beta {
        Some(src) => Some(CovectorField::Exact(parse_expr(src, &model_names(&loaded))?)),
        None => None,
    };
    let shifted = projective_shift(s, a.scale, beta, &x)?;
    let d = shift_trace_distance(s, &shifted, &x, &xi, a.scale < 0.0, &opts)?;
    println!("frechet distance {d:.3e} (tol {:.1e})", a.tol);
    write_report(m, json!({ "scale": a.scale, "beta": a.beta, "frechet": d, "tol": a.tol }), a.out.as_deref())?;
    Ok(if d <= a.tol { Outcome::Pass } else { Outcome::CheckFailed(format!("frechet distance {d:e}")) })
}

