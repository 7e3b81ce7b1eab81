//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use kropina::compare::{frechet_distance, sup_distance, FrechetOptions};
use kropina::connect::{connect_points, ShootingProblem};
use kropina::cr::{burns_shnider_scalar, heisenberg_kropina, tw_scalar_curvature, CRModelSpec};
use kropina::equivalence::{
    blowup_probe, closed_form_connection, log_spaced, pregeodesic_residual, projective_shift, shift_trace_distance,
};
use kropina::euler_lagrange::{assemble_el_system, geodesic_rhs, integrate_geodesic, min_norm_acceleration, Gauge, GeodesicState, TraceOptions};
use kropina::expr::parse_expr;
use kropina::geometry::{auto_modification, eval_f, indicatrix_of, sample_indicatrix, CovectorField, ExprModel, KropinaStructure};
use kropina::lift::{lift_trace, LiftOptions};
use kropina::ode::{integrate_fixed, FixedMethod, Tolerances};
use kropina::{config::catalog_model, Error};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Random Heisenberg seeds near the origin with `|ω(ξ)| ≥ 0.2`.
fn heisenberg_seeds(count: usize, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let h = heisenberg_kropina(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let x = DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
        let xi = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        if h.oneform(&x).dot(&xi).abs() >= 0.2 {
            out.push((x, xi));
        }
    }
    out
}

fn lift_opts() -> LiftOptions {
    LiftOptions { tol: Tolerances::new(1e-9, 1e-12), t_max: 1.0, ..Default::default() }
}

fn criterion_1() -> Outcome {
    let h = heisenberg_kropina(1);
    let opts = TraceOptions::new(Gauge::OmegaConstant, 1.0).with_tol(1e-9, 1e-12);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (x, xi) in heisenberg_seeds(20, 1) {
        let el = integrate_geodesic(&h, &x, &xi, &opts).map_err(err)?;
        let (_, proj) = lift_trace(&h, &x, &xi, &lift_opts()).map_err(err)?;
        let (e0, e1) = el.span();
        if e0 != 0.0 || e1 < 1.0 || proj.span().1 < 1.0 {
            return Err(format!("integration stopped early: EL span [{e0}, {e1}], lift span {:?}", proj.span()));
        }
        worst = worst.max(sup_distance(&el, &proj).map_err(err)?);
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-6 && secs < 5.0, format!("max sup distance {worst:.2e} (≤ 1e-6), {secs:.2} s (< 5 s)"))
}

fn criterion_2() -> Outcome {
    let h = heisenberg_kropina(1);
    let (mut drift, mut null): (f64, f64) = (0.0, 0.0);
    for (x, xi) in heisenberg_seeds(20, 2) {
        let (lift, _) = lift_trace(&h, &x, &xi, &lift_opts()).map_err(err)?;
        drift = drift.max(lift.momentum_drift());
        null = null.max(lift.max_null_defect());
    }
    check(drift <= 1e-8 && null <= 1e-8, format!("momentum drift {drift:.2e}, null defect {null:.2e} (both ≤ 1e-8)"))
}

/// `g = I + sym(linear)`, `ω = c + linear`, coefficients small enough that
/// `g` stays positive definite on the sampling box.
fn random_structure(rng: &mut ChaCha8Rng, n: usize) -> KropinaStructure {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let lin = |scale: f64, rng: &mut ChaCha8Rng| -> String {
        let mut s = format!("{}", rng.random_range(-1.0..1.0) * scale);
        for name in &names {
            s += &format!(" + ({})*{name}", rng.random_range(-1.0..1.0) * scale);
        }
        s += &format!(" + ({})*sin({})", rng.random_range(-1.0..1.0) * scale, names[0]);
        s
    };
    let mut metric = vec![String::new(); n * n];
    for i in 0..n {
        for j in i..n {
            let off = lin(0.1, rng);
            let e = if i == j { format!("1 + {off}") } else { off };
            metric[i * n + j] = e.clone();
            metric[j * n + i] = e;
        }
    }
    let oneform: Vec<String> = (0..n).map(|_| lin(1.0, rng)).collect();
    let p = |e: &String| parse_expr(e, &names).unwrap();
    KropinaStructure::new(ExprModel { metric: metric.iter().map(p).collect(), oneform: oneform.iter().map(p).collect() }, "random")
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut kernel, mut resid): (f64, f64) = (0.0, 0.0);
    let mut bad_rank = 0;
    let mut cases = 0;
    while cases < 100 {
        let n = rng.random_range(2..=5);
        let s = random_structure(&mut rng, n);
        let x = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let xi = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if s.oneform(&x).dot(&xi).abs() < 0.1 {
            continue;
        }
        cases += 1;
        let sys = assemble_el_system(&s, &x, &xi).map_err(err)?;
        let an = sys.a.norm();
        kernel = kernel.max((&sys.a * &xi).norm() / (an * xi.norm()));
        let sv = sys.a.clone().singular_values();
        let rank = sv.iter().filter(|&&sv_k| sv_k > 1e-9 * sv.max()).count();
        if rank != n - 1 {
            bad_rank += 1;
        }
        let eta = min_norm_acceleration(&sys).map_err(err)?;
        let r = (&sys.a * &eta - &sys.b).norm() / (an * eta.norm() + sys.b.norm()).max(f64::MIN_POSITIVE);
        resid = resid.max(r);
    }
    check(
        kernel <= 1e-12 && bad_rank == 0 && resid <= 1e-10,
        format!("‖Aξ‖/(‖A‖‖ξ‖) {kernel:.1e}, rank defects {bad_rank}/100, relative solve residual {resid:.1e}"),
    )
}

/// `g = δ`, `ω = d(x¹ + 0.3 sin x²)`.
fn closed_structure() -> KropinaStructure {
    let names: Vec<String> = vec!["x1".into(), "x2".into()];
    let p = |e: &str| parse_expr(e, &names).unwrap();
    KropinaStructure::new(ExprModel { metric: vec![p("1"), p("0"), p("0"), p("1")], oneform: vec![p("1"), p("0.3*cos(x2)")] }, "closed")
}

fn criterion_4() -> Outcome {
    let s = closed_structure();
    let opts = TraceOptions::new(Gauge::OmegaConstant, 1.0).with_tol(1e-10, 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut seeds = 0;
    while seeds < 10 {
        let x = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let xi = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        if s.oneform(&x).dot(&xi) < 0.2 {
            continue;
        }
        seeds += 1;
        let traj = integrate_geodesic(&s, &x, &xi, &opts).map_err(err)?;
        worst = worst.max(pregeodesic_residual(&traj, |y| closed_form_connection(&s, y)).map_err(err)?);
    }
    let refuses = matches!(closed_form_connection(&heisenberg_kropina(1), &v(&[0.2, 0.1, 0.0])), Err(Error::NotClosed { .. }));
    check(worst <= 1e-6 && refuses, format!("max pregeodesic residual {worst:.2e} (≤ 1e-6), Heisenberg refused: {refuses}"))
}

fn criterion_5() -> Outcome {
    let h = heisenberg_kropina(1);
    let x = DVector::zeros(3);
    let report = blowup_probe(&h, &x, &v(&[1.0, 0.0, 0.0]), &v(&[0.0, 0.0, 1.0]), &log_spaced(1e-1, 1e-4, 13)).map_err(err)?;
    let k = report.fitted_exponent;
    check((k + 1.0).abs() <= 0.05, format!("fitted exponent {k:.4} (−1 ± 0.05)"))
}

/// Structures with positive definite `g`, where the indicatrix is compact.
fn compact_indicatrix_models() -> Result<Vec<KropinaStructure>, String> {
    let mut models = vec![catalog_model("euclidean:2").map_err(err)?.structure, catalog_model("euclidean:3").map_err(err)?.structure];
    models.push(closed_structure());
    let (modified, _) = auto_modification(&heisenberg_kropina(1), &v(&[0.3, 0.4, 0.5])).map_err(err)?;
    models.push(modified);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for n in 2..=4 {
        models.push(random_structure(&mut rng, n));
    }
    Ok(models)
}

fn criterion_6() -> Outcome {
    let models = compact_indicatrix_models()?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut zero_exact = true;
    for s in &models {
        let n = s.dim();
        let x = DVector::from_fn(n, |_, _| rng.random_range(0.2..0.5));
        let samples = sample_indicatrix(s, &x, 100).map_err(err)?;
        if samples.len() != 100 {
            return Err(format!("{}: {} samples", s.label(), samples.len()));
        }
        for u in &samples {
            worst = worst.max((eval_f(s, &x, u).map_err(err)? - 1.0).abs());
        }
        // g(0 − W, 0 − W) = g(W, W)
        let ind = indicatrix_of(s, &x).map_err(err)?;
        let g = s.metric(&x);
        let w = -&ind.center;
        zero_exact &= w.dot(&(&g * &w)) == ind.center.dot(&(&g * &ind.center));
    }
    check(worst <= 1e-10 && zero_exact, format!("max |F − 1| {worst:.1e} over {} models, zero vector exact: {zero_exact}", models.len()))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let n = 1 + k % 2;
        let spec = CRModelSpec::burns_shnider(n);
        let rho: f64 = rng.random_range(0.5..2.0);
        let phi: f64 = rng.random_range(-0.45 * PI..0.45 * PI);
        let z2 = rho * rho * phi.cos();
        let dir = DVector::from_fn(2 * n, |_, _| rng.random_range(-1.0..1.0)).normalize();
        let mut x: Vec<f64> = (dir * z2.sqrt()).iter().copied().collect();
        x.push(rho * rho * phi.sin());
        let r = tw_scalar_curvature(&spec, &x).map_err(err)?;
        let expect = burns_shnider_scalar(n, &x).map_err(err)?;
        worst = worst.max((r - expect).abs());
    }
    let mut on_axis: f64 = 0.0;
    for n in [1, 2] {
        for t in [-1.5, -0.3, 0.7, 2.0] {
            let mut x = vec![0.0; 2 * n];
            x.push(t);
            on_axis = on_axis.max(tw_scalar_curvature(&CRModelSpec::burns_shnider(n), &x).map_err(err)?.abs());
        }
    }
    check(worst <= 1e-6 && on_axis <= 1e-8, format!("max |R̂ − closed form| {worst:.1e} (≤ 1e-6), max |R̂(0,t)| {on_axis:.1e} (≤ 1e-8)"))
}

fn criterion_8() -> Outcome {
    let h = heisenberg_kropina(1);
    let names = kropina::cr::coordinate_names(1);
    let beta = CovectorField::Exact(parse_expr("0.1*x", &names).map_err(err)?);
    let opts = TraceOptions::new(Gauge::OmegaConstant, 1.0).with_tol(1e-10, 1e-12);
    let probe = DVector::zeros(3);
    let forward = projective_shift(&h, 2.0, Some(beta.clone()), &probe).map_err(err)?;
    let reversed = projective_shift(&h, -1.0, None, &probe).map_err(err)?;
    let (mut d_fwd, mut d_rev): (f64, f64) = (0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut seeds = 0;
    while seeds < 10 {
        let x = DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
        let xi = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        // F̂ must be positive on the seed as well
        let wx = h.oneform(&x).dot(&xi);
        if wx < 0.2 || eval_f(&forward, &x, &xi).map_or(true, |f| f <= 0.0) {
            continue;
        }
        seeds += 1;
        d_fwd = d_fwd.max(shift_trace_distance(&h, &forward, &x, &xi, false, &opts).map_err(err)?);
        d_rev = d_rev.max(shift_trace_distance(&h, &reversed, &x, &xi, true, &opts).map_err(err)?);
    }
    // without reversal the c = −1 traces must not coincide
    let (x, xi) = (v(&[0.1, 0.2, 0.0]), v(&[0.6, -0.3, 1.0]));
    let a = integrate_geodesic(&h, &x, &xi, &opts).map_err(err)?;
    let b = integrate_geodesic(&reversed, &x, &(-&xi), &opts).map_err(err)?;
    let naive = frechet_distance(&a, &b, &FrechetOptions::default()).map_err(err)?;
    check(
        d_fwd <= 1e-5 && d_rev <= 1e-5 && naive > 1e-2,
        format!("c = 2: Fréchet {d_fwd:.1e}; c = −1 reversed: {d_rev:.1e}; unreversed: {naive:.2} (distinct)"),
    )
}

fn criterion_9() -> Outcome {
    let h = heisenberg_kropina(1);
    let q = v(&[0.1, 0.05, 0.02]);
    let start = Instant::now();
    let prob = ShootingProblem::new(h.clone(), DVector::zeros(3), q.clone()).map_err(err)?;
    let conn = connect_points(&prob).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let end_err = (&conn.trajectory.last().x - &q).norm();
    let min_omega = conn.trajectory.samples.iter().map(|p| p.omega_xi).fold(f64::INFINITY, f64::min);
    check(
        end_err <= 1e-6 && min_omega > 0.0 && secs < 30.0,
        format!("endpoint residual {end_err:.1e}, min ω(ξ) {min_omega:.3}, length {:.4}, {secs:.2} s", conn.length),
    )
}

fn criterion_10() -> Outcome {
    let h = heisenberg_kropina(1);
    // g(ξ,ξ) = ω(ξ) for ξ = ¼(1, 0, ½)
    let y0 = [0.0, 0.0, 0.0, 0.25, 0.0, 0.125];
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> kropina::Result<()> {
        let st = GeodesicState::new(v(&y[..3]), v(&y[3..]));
        let (dx, dxi) = geodesic_rhs(&h, &st, Gauge::FArclength)?;
        dy[..3].copy_from_slice(dx.as_slice());
        dy[3..].copy_from_slice(dxi.as_slice());
        Ok(())
    };
    let reference = integrate_fixed(&rhs, &y0, 0.0, 1.0, 4096, FixedMethod::Rk4).map_err(err)?;
    let mut pts = Vec::new();
    for k in 0..5 {
        let steps = 8usize << k;
        let y = integrate_fixed(&rhs, &y0, 0.0, 1.0, steps, FixedMethod::Rk4).map_err(err)?;
        let e = y.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        pts.push(((1.0 / steps as f64).ln(), e.ln()));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    check(slope >= 3.9, format!("RK4 self-convergence slope {slope:.3} (≥ 3.9) over h = 1/8 … 1/128"))
}

fn criterion_11() -> Outcome {
    let h = heisenberg_kropina(1);
    let opts = TraceOptions::new(Gauge::OmegaConstant, 1.0).with_tol(1e-10, 1e-12);
    let traj = integrate_geodesic(&h, &DVector::zeros(3), &v(&[0.0, 0.0, 1.0]), &opts).map_err(err)?;
    let off_axis = traj.samples.iter().map(|p| p.x[0].hypot(p.x[1])).fold(0.0, f64::max);
    let reached = traj.span().1;
    check(off_axis <= 1e-9 && reached >= 1.0, format!("max distance from t-axis {off_axis:.1e} over [0, {reached}]"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("EL vs projected null lift on heisenberg:1", criterion_1),
        ("lift conservation", criterion_2),
        ("algebraic identities of the EL system", criterion_3),
        ("closed-form connection", criterion_4),
        ("acceleration blow-up exponent", criterion_5),
        ("indicatrix", criterion_6),
        ("Burns-Shnider scalar curvature", criterion_7),
        ("projective shift", criterion_8),
        ("local connectivity", criterion_9),
        ("integrator order", criterion_10),
        ("Reeb orbit is a chain", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name}: {detail} [{secs:.2} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name}: {detail} [{secs:.2} s]", k + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
