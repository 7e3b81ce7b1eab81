//! Two-point connection by shooting in the arclength gauge, path length and
//! upper bounds for the quasi-distance.
//!
//! Initial directions live on the indicatrix at `p`, parameterized by
//! stereographic coordinates projected from the origin of `T_pM` (where
//! `ω = 0`): `0` is the pole `2W`, and the band `ω(v) ≥ δ` is a ball.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler_lagrange::{integrate_geodesic, Gauge, TraceOptions};
use crate::expr::Expr;
use crate::geometry::{auto_modification, eval_f, sample_indicatrix_capped, IndicatrixFrame, KropinaStructure, Point, Tangent, DEFAULT_CAP};
use crate::ode::{Termination, Tolerances};
use crate::trajectory::Trajectory;

/// Integrator tolerances for shots; tight enough for finite-difference
/// Jacobians with step `FD_STEP`.
pub const SHOT_TOL: Tolerances = Tolerances { rtol: 1e-11, atol: 1e-13 };
pub const FD_STEP: f64 = 1e-5;
const LM_MAX_ITERS: usize = 60;

#[derive(Clone, Debug)]
pub struct ShootingProblem {
    pub structure: KropinaStructure,
    pub p: Point,
    pub q: Point,
    /// Lower bound on `ω(ξ)` for initial directions, as a multiple of `g(W,W)`.
    pub delta_cap: f64,
    /// Longest shot of the coarse search.
    pub t_max: f64,
    pub endpoint_tol: f64,
    /// Directions in the coarse grid.
    pub grid: usize,
    /// Refinements attempted, best coarse candidates first.
    pub budget: usize,
}

impl ShootingProblem {
    pub fn new(structure: KropinaStructure, p: Point, q: Point) -> Result<Self> {
        let n = structure.dim();
        if p.len() != n || q.len() != n {
            return Err(Error::DimensionMismatch(format!("structure has dimension {n}")));
        }
        if (&p - &q).norm() == 0.0 {
            return Err(Error::InvalidInput("start and end points coincide".into()));
        }
        let t_max = 4.0 * (&p - &q).norm().max(0.05);
        Ok(ShootingProblem { structure, p, q, delta_cap: DEFAULT_CAP, t_max, endpoint_tol: 1e-6, grid: 64, budget: 12 })
    }

    fn validate(&self) -> Result<()> {
        if (&self.p - &self.q).norm() == 0.0 {
            return Err(Error::InvalidInput("start and end points coincide".into()));
        }
        if !(self.delta_cap > 0.0 && self.delta_cap < 4.0) {
            return Err(Error::InvalidInput(format!("delta cap must lie in (0, 4), got {}", self.delta_cap)));
        }
        if !(self.t_max > 0.0 && self.endpoint_tol > 0.0) || self.grid == 0 {
            return Err(Error::InvalidInput("t_max, endpoint_tol and grid must be positive".into()));
        }
        Ok(())
    }
}

/// Unit vector for stereographic coordinates `p ∈ ℝⁿ⁻¹`.
pub fn unit_from_params(params: &[f64]) -> DVector<f64> {
    let s2: f64 = params.iter().map(|v| v * v).sum();
    let n = params.len() + 1;
    DVector::from_fn(n, |i, _| if i + 1 < n { 2.0 * params[i] / (1.0 + s2) } else { (1.0 - s2) / (1.0 + s2) })
}

/// Inverse of [`unit_from_params`]; undefined at the projection point.
pub fn params_from_unit(u: &DVector<f64>) -> Vec<f64> {
    let n = u.len();
    let denom = 1.0 + u[n - 1];
    (0..n - 1).map(|i| u[i] / denom).collect()
}

/// Squared radius of the parameter ball on which `ω(v) ≥ cap·g(W,W)`.
pub fn param_radius_sq(cap: f64) -> f64 {
    (4.0 - cap) / cap
}

/// Indicatrix vector for the given direction parameters.
pub fn direction_from_params(frame: &IndicatrixFrame, params: &[f64]) -> Tangent {
    frame.vector(&unit_from_params(params))
}

#[derive(Clone, Debug)]
pub struct Shot {
    pub endpoint: Point,
    /// `∂ endpoint / ∂(params, T)`, `n × n`.
    pub jac: DMatrix<f64>,
    pub trajectory: Trajectory,
}

fn shot_options(t: f64) -> TraceOptions {
    let mut o = TraceOptions::new(Gauge::FArclength, t);
    o.tol = SHOT_TOL;
    o
}

fn stop_error(traj: &Trajectory) -> Option<Error> {
    let t = traj.last().t;
    match &traj.meta.termination {
        Termination::Completed => None,
        Termination::KernelApproach | Termination::AccelerationCap => Some(Error::KernelApproach { t }),
        Termination::StepSizeUnderflow => Some(Error::StepSizeUnderflow { t }),
        other => Some(Error::InvalidInput(format!("shot stopped at t = {t}: {other}"))),
    }
}

fn endpoint(s: &KropinaStructure, frame: &IndicatrixFrame, p: &Point, params: &[f64], t: f64) -> Result<(Point, Trajectory)> {
    let xi = direction_from_params(frame, params);
    let traj = integrate_geodesic(s, p, &xi, &shot_options(t))?;
    if let Some(e) = stop_error(&traj) {
        return Err(e);
    }
    Ok((traj.last().x.clone(), traj))
}

/// Integrates from `(p, ξ(params))` for time `t` in the arclength gauge.
/// The Jacobian column for `t` is the final velocity; the others are
/// central differences with step [`FD_STEP`].
pub fn shoot_endpoint(s: &KropinaStructure, p: &Point, params: &[f64], t: f64) -> Result<Shot> {
    shoot_with_step(s, p, params, t, FD_STEP)
}

pub fn shoot_with_step(s: &KropinaStructure, p: &Point, params: &[f64], t: f64, h: f64) -> Result<Shot> {
    let n = s.dim();
    if params.len() + 1 != n {
        return Err(Error::DimensionMismatch(format!("expected {} direction parameters", n - 1)));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("shot length must be positive, got {t}")));
    }
    let frame = IndicatrixFrame::at(s, p)?;
    let (end, traj) = endpoint(s, &frame, p, params, t)?;
    let mut jac = DMatrix::zeros(n, n);
    let mut work = params.to_vec();
    for k in 0..n - 1 {
        work[k] = params[k] + h;
        let (plus, _) = endpoint(s, &frame, p, &work, t)?;
        work[k] = params[k] - h;
        let (minus, _) = endpoint(s, &frame, p, &work, t)?;
        work[k] = params[k];
        jac.set_column(k, &((plus - minus) / (2.0 * h)));
    }
    jac.set_column(n - 1, &traj.last().xi);
    Ok(Shot { endpoint: end, jac, trajectory: traj })
}

/// `∫F(γ, γ̇) dt` by composite Simpson on the sample intervals.
pub fn path_length(s: &KropinaStructure, traj: &Trajectory) -> Result<f64> {
    for (index, p) in traj.samples.iter().enumerate() {
        let w = s.oneform(&p.x).dot(&p.xi);
        if !(w > 0.0) {
            return Err(Error::NotAdmissible { index, omega_xi: w });
        }
    }
    let f_at = |t: f64| -> Result<f64> {
        let (x, xi) = traj.state_at(t)?;
        eval_f(s, &x, &xi)
    };
    let mut total = 0.0;
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let fm = f_at(0.5 * (a.t + b.t))?;
        total += (b.t - a.t) / 6.0 * (eval_f(s, &a.x, &a.xi)? + 4.0 * fm + eval_f(s, &b.x, &b.xi)?);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: Vec<f64>,
    pub t: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Connection {
    /// Diagnostics recomputed on the original structure.
    pub trajectory: Trajectory,
    /// Length in the original structure.
    pub length: f64,
    pub residual: f64,
    pub params: Vec<f64>,
    pub t_end: f64,
    pub initial_velocity: Tangent,
    /// Potential `f` of the modification used for shooting, if any.
    pub modification: Option<Expr>,
    /// Lengths of every successful refinement, in refinement order.
    pub solutions: Vec<Solution>,
    pub refinements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub params: Vec<f64>,
    pub t_end: f64,
    pub length: f64,
    pub residual: f64,
}

/// Structure used for shooting: `s` itself when `g` is positive definite at
/// `p`, otherwise an automatic modification with the same traces.
pub fn shooting_structure(s: &KropinaStructure, p: &Point) -> Result<(KropinaStructure, Option<Expr>)> {
    if nalgebra::Cholesky::new(s.metric(p)).is_some() {
        return Ok((s.clone(), None));
    }
    let (m, f) = auto_modification(s, p)?;
    Ok((m, Some(f)))
}

/// Coarse search: per grid direction, the closest approach to `q` within
/// `t_max`, sorted by residual.
pub fn coarse_candidates(s: &KropinaStructure, prob: &ShootingProblem) -> Result<Vec<Candidate>> {
    let frame = IndicatrixFrame::at(s, &prob.p)?;
    let dirs = sample_indicatrix_capped(s, &prob.p, prob.grid, prob.delta_cap)?;
    let inv = frame.map.clone().try_inverse().ok_or(Error::DegenerateMetric)?;
    let mut opts = TraceOptions::new(Gauge::FArclength, prob.t_max);
    opts.output_step = Some(prob.t_max / 400.0);
    let mut cands: Vec<Candidate> = dirs
        .par_iter()
        .filter_map(|v| {
            let params = params_from_unit(&(&inv * (v - &frame.center)));
            let traj = integrate_geodesic(s, &prob.p, v, &opts).ok()?;
            let best = traj
                .samples
                .iter()
                .skip(1)
                .map(|smp| (smp.t, (&smp.x - &prob.q).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))?;
            Some(Candidate { params, t: best.0, residual: best.1 })
        })
        .collect();
    cands.sort_by(|a, b| a.residual.total_cmp(&b.residual).then(a.t.total_cmp(&b.t)));
    Ok(cands)
}

/// Levenberg–Marquardt on `endpoint(params, T) − q`.
pub fn refine(s: &KropinaStructure, prob: &ShootingProblem, start: &Candidate) -> Result<Solution> {
    let n = s.dim();
    let r2max = param_radius_sq(prob.delta_cap);
    let mut z: Vec<f64> = start.params.iter().copied().chain([start.t]).collect();
    let eval = |z: &[f64]| shoot_endpoint(s, &prob.p, &z[..n - 1], z[n - 1]);
    let mut shot = eval(&z)?;
    let mut r = &shot.endpoint - &prob.q;
    let mut mu = 1e-3;
    for _ in 0..LM_MAX_ITERS {
        if r.norm() <= 0.01 * prob.endpoint_tol {
            break;
        }
        let jtj = shot.jac.transpose() * &shot.jac;
        let g = shot.jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for i in 0..n {
                m[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = m.lu().solve(&(-&g)) else {
                mu *= 4.0;
                continue;
            };
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r2: f64 = trial[..n - 1].iter().map(|v| v * v).sum();
            if r2 > r2max || trial[n - 1] <= 0.0 {
                mu *= 4.0;
                continue;
            }
            match eval(&trial) {
                Ok(next) => {
                    let rn = &next.endpoint - &prob.q;
                    if rn.norm() < r.norm() {
                        z = trial;
                        shot = next;
                        r = rn;
                        mu = (mu / 3.0).max(1e-12);
                        improved = true;
                        break;
                    }
                    mu *= 4.0;
                }
                Err(_) => mu *= 4.0,
            }
        }
        if !improved {
            break;
        }
    }
    let residual = r.norm();
    let length = path_length(&prob.structure, &shot.trajectory.resample(&prob.structure, &times(&shot.trajectory))?)?;
    Ok(Solution { params: z[..n - 1].to_vec(), t_end: z[n - 1], length, residual })
}

fn times(traj: &Trajectory) -> Vec<f64> {
    traj.samples.iter().map(|p| p.t).collect()
}

/// Coarse grid, then refinement of the best `budget` candidates; returns the
/// shortest connection whose endpoint residual is within `endpoint_tol`.
pub fn connect_points(prob: &ShootingProblem) -> Result<Connection> {
    prob.validate()?;
    let (s, modification) = shooting_structure(&prob.structure, &prob.p)?;
    let cands = coarse_candidates(&s, prob)?;
    let chosen: Vec<&Candidate> = cands.iter().take(prob.budget).collect();
    let results: Vec<Result<Solution>> = chosen.par_iter().map(|c| refine(&s, prob, c)).collect();
    let mut best_residual = cands.first().map_or(f64::INFINITY, |c| c.residual);
    let mut solutions = Vec::new();
    for r in results.into_iter().flatten() {
        best_residual = best_residual.min(r.residual);
        if r.residual <= prob.endpoint_tol {
            solutions.push(r);
        }
    }
    let Some(best) = solutions.iter().min_by(|a, b| a.length.total_cmp(&b.length)).cloned() else {
        return Err(Error::NotFound { best_residual });
    };
    let frame = IndicatrixFrame::at(&s, &prob.p)?;
    let xi0 = direction_from_params(&frame, &best.params);
    let traj = integrate_geodesic(&s, &prob.p, &xi0, &shot_options(best.t_end))?;
    let traj = traj.resample(&prob.structure, &times(&traj))?;
    Ok(Connection {
        length: best.length,
        residual: best.residual,
        params: best.params.clone(),
        t_end: best.t_end,
        initial_velocity: xi0,
        trajectory: traj,
        modification,
        refinements: chosen.len(),
        solutions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiDistance {
    /// Least length found; an upper bound for the quasi-distance.
    pub distance: f64,
    /// Number of distinct connecting geodesics found.
    pub multiplicity: usize,
    pub lengths: Vec<f64>,
}

/// Upper bound for the quasi-distance from `p` to `q` using `budget`
/// refinements. Refinement starts are a prefix of a fixed sorted list, so
/// the value is nonincreasing in `budget`.
pub fn quasi_distance(s: &KropinaStructure, p: &Point, q: &Point, budget: usize) -> Result<QuasiDistance> {
    let mut prob = ShootingProblem::new(s.clone(), p.clone(), q.clone())?;
    prob.budget = budget;
    let c = connect_points(&prob)?;
    let mut distinct: Vec<&Solution> = Vec::new();
    for sol in &c.solutions {
        let seen = distinct.iter().any(|d| {
            let dp: f64 = d.params.iter().zip(&sol.params).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            dp <= 1e-4 && (d.t_end - sol.t_end).abs() <= 1e-4
        });
        if !seen {
            distinct.push(sol);
        }
    }
    Ok(QuasiDistance {
        distance: c.length,
        multiplicity: distinct.len(),
        lengths: c.solutions.iter().map(|s| s.length).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr::heisenberg_kropina;
    use crate::geometry::euclidean;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn stereographic_round_trip() {
        for p in [vec![0.0, 0.0], vec![0.3, -1.2], vec![5.0, 2.0]] {
            let u = unit_from_params(&p);
            assert!((u.norm() - 1.0).abs() < 1e-15);
            let back = params_from_unit(&u);
            for (a, b) in p.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // boundary of the cap ball sits at u_n = cap/2 − 1
        let r = param_radius_sq(0.05).sqrt();
        assert!((unit_from_params(&[r, 0.0])[2] - (0.025 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn euclidean_pole_shot_is_unit_step() {
        let e = euclidean(3, 0);
        let o = v(&[0.0; 3]);
        let shot = shoot_endpoint(&e, &o, &[0.0, 0.0], 1.0).unwrap();
        assert!((shot.endpoint - v(&[1.0, 0.0, 0.0])).norm() < 1e-10);
        assert!((path_length(&e, &shot.trajectory).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn jacobian_is_step_consistent() {
        let h = heisenberg_kropina(1);
        let o = v(&[0.0; 3]);
        let (m, _) = shooting_structure(&h, &o).unwrap();
        let a = shoot_with_step(&m, &o, &[0.2, -0.1], 0.15, 1e-4).unwrap();
        let b = shoot_with_step(&m, &o, &[0.2, -0.1], 0.15, 5e-5).unwrap();
        let rel = (&a.jac - &b.jac).norm() / a.jac.norm();
        assert!(rel <= 1e-4, "{rel}");
    }

    #[test]
    fn arclength_trajectory_length_is_elapsed_time() {
        let h = heisenberg_kropina(1);
        let o = v(&[0.0; 3]);
        let (m, _) = shooting_structure(&h, &o).unwrap();
        let shot = shoot_endpoint(&m, &o, &[0.4, 0.3], 0.7).unwrap();
        assert!((path_length(&m, &shot.trajectory).unwrap() - 0.7).abs() <= 1e-8);
    }

    #[test]
    fn euclidean_connection_is_straight() {
        let e = euclidean(3, 0);
        let q = v(&[0.5, 0.2, 0.0]);
        let prob = ShootingProblem::new(e.clone(), v(&[0.0; 3]), q.clone()).unwrap();
        let c = connect_points(&prob).unwrap();
        assert!(c.residual <= 1e-6);
        // F along the chord direction is |q|²/q₁
        assert!((c.length - 0.29 / 0.5).abs() <= 1e-6, "{}", c.length);
        let d = quasi_distance(&e, &v(&[0.0; 3]), &v(&[1.0, 0.0, 0.0]), 4).unwrap();
        assert!((d.distance - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn heisenberg_chain_joins_nearby_points() {
        let h = heisenberg_kropina(1);
        let prob = ShootingProblem::new(h.clone(), v(&[0.0; 3]), v(&[0.1, 0.05, 0.02])).unwrap();
        let c = connect_points(&prob).unwrap();
        assert!(c.residual <= 1e-6, "{}", c.residual);
        assert!(c.trajectory.samples.iter().all(|p| p.omega_xi > 0.0));
        let again = integrate_geodesic(&shooting_structure(&h, &prob.p).unwrap().0, &prob.p, &c.initial_velocity, &shot_options(c.t_end)).unwrap();
        assert!((&again.last().x - &c.trajectory.last().x).norm() <= 1e-7);
    }

    #[test]
    fn coincident_points_rejected() {
        let e = euclidean(2, 0);
        assert!(ShootingProblem::new(e, v(&[0.0, 0.0]), v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn admissibility_is_checked() {
        let e = euclidean(2, 0);
        let traj = integrate_geodesic(&e, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &TraceOptions::default()).unwrap();
        let back = crate::geometry::backward(&e);
        assert!(matches!(path_length(&back, &traj), Err(Error::NotAdmissible { index: 0, .. })));
    }
}
