//! The lifted metric `g̃ = g + 2ω·dx⁰` on `ℝ × M` and its null geodesics.
//!
//! Coordinates are `(x⁰, x¹..xⁿ)`. `∂/∂x⁰` is a null Killing field, so
//! `p₀ = ω(ẋ)` is conserved, and projected null geodesics with `p₀ ≠ 0` are
//! Kropina geodesics in the parameterization with `ω(ξ)` constant.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::euler_lagrange::{build_trajectory, Gauge};
use crate::geometry::{check_nondegenerate_on_kernel, checked_omega, KropinaStructure, Point, Tangent, EPS_OMEGA};
use crate::linalg::{bilinear, bordered};
use crate::ode::{integrate_adaptive, AdaptiveOptions, DenseOutput, Event, Stats, Termination, Tolerances};
use crate::trajectory::{DenseMap, Trajectory, TrajectoryMeta};

/// `g̃` of a Kropina structure; independent of `x⁰`.
#[derive(Clone, Debug)]
pub struct LiftMetric {
    base: KropinaStructure,
}

impl LiftMetric {
    pub fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    pub fn base(&self) -> &KropinaStructure {
        &self.base
    }

    /// `[[0, ωᵀ], [ω, g]]` at base point `x`.
    pub fn matrix(&self, x: &Point) -> DMatrix<f64> {
        bordered(&self.base.metric(x), &self.base.oneform(x))
    }
}

/// Builds `g̃`, checking nondegeneracy of `g` on `ker ω` at `probe`.
pub fn lift_metric(s: &KropinaStructure, probe: &Point) -> Result<LiftMetric> {
    let r = check_nondegenerate_on_kernel(s, probe);
    if !r.ok {
        return Err(Error::DegenerateOnKernel { det: r.bordered_det });
    }
    Ok(LiftMetric { base: s.clone() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftState {
    pub x0: f64,
    pub x: Point,
    pub xi0: f64,
    pub xi: Tangent,
}

impl LiftState {
    fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.x.len() + 2);
        y.push(self.x0);
        y.extend_from_slice(self.x.as_slice());
        y.push(self.xi0);
        y.extend_from_slice(self.xi.as_slice());
        y
    }

    fn from_slice(y: &[f64]) -> Self {
        let n = y.len() / 2 - 1;
        LiftState {
            x0: y[0],
            x: DVector::from_column_slice(&y[1..n + 1]),
            xi0: y[n + 1],
            xi: DVector::from_column_slice(&y[n + 2..]),
        }
    }

    /// `g̃(γ̇, γ̇) = g(ξ,ξ) + 2ω(ξ)ξ⁰`.
    pub fn null_defect(&self, s: &KropinaStructure) -> f64 {
        let w = s.oneform(&self.x).dot(&self.xi);
        bilinear(&s.metric(&self.x), &self.xi, &self.xi) + 2.0 * w * self.xi0
    }

    /// `p₀ = g̃(∂_0, γ̇) = ω(ξ)`.
    pub fn momentum(&self, s: &KropinaStructure) -> f64 {
        s.oneform(&self.x).dot(&self.xi)
    }
}

/// Null lift of `(x, ξ)`: `ξ⁰ = −g(ξ,ξ)/(2ω(ξ))`.
pub fn null_initial_lift(s: &KropinaStructure, x: &Point, xi: &Tangent, x0_start: f64) -> Result<LiftState> {
    let w = checked_omega(&s.oneform(x), xi)?;
    let xi0 = -bilinear(&s.metric(x), xi, xi) / (2.0 * w);
    Ok(LiftState { x0: x0_start, x: x.clone(), xi0, xi: xi.clone() })
}

/// Geodesic acceleration `−g̃⁻¹ r` with `r_d = Γ̃_{d,bc} ẋ^b ẋ^c`. Returns
/// `(d/dt state)` as `(ẋ⁰, ẋ, ẍ⁰, ẍ)`.
pub fn lift_geodesic_rhs(l: &LiftMetric, st: &LiftState) -> Result<LiftState> {
    let s = &l.base;
    let n = s.dim();
    let jet = s.jet(&st.x);
    let m = n + 1;
    let gt = bordered(&jet.metric, &jet.oneform);
    let v = DVector::from_fn(m, |i, _| if i == 0 { st.xi0 } else { st.xi[i - 1] });
    // ∂_k g̃ for k ≥ 1; ∂_0 g̃ = 0
    let dgt: Vec<DMatrix<f64>> = (0..n)
        .map(|k| bordered(&jet.dmetric[k], &jet.doneform.row(k).transpose()))
        .collect();
    let mut d = DMatrix::zeros(m, m);
    for k in 0..n {
        d += &dgt[k] * st.xi[k];
    }
    let mut r = &d * &v;
    for k in 0..n {
        r[k + 1] -= 0.5 * v.dot(&(&dgt[k] * &v));
    }
    let lu = gt.lu();
    let acc = lu.solve(&r).ok_or(Error::DegenerateMetric)?;
    if acc.iter().any(|a| !a.is_finite()) {
        return Err(Error::DegenerateMetric);
    }
    Ok(LiftState { x0: st.xi0, x: st.xi.clone(), xi0: -acc[0], xi: -acc.rows(1, n).into_owned() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftSample {
    pub t: f64,
    pub state: LiftState,
    pub momentum: f64,
    pub null_defect: f64,
}

#[derive(Clone, Debug)]
pub struct LiftTrajectory {
    pub samples: Vec<LiftSample>,
    pub meta: TrajectoryMeta,
    ts: Vec<f64>,
    ys: Vec<Vec<f64>>,
    dense: DenseOutput,
    structure: KropinaStructure,
}

impl LiftTrajectory {
    pub fn dense_state(&self, t: f64) -> Result<LiftState> {
        Ok(LiftState::from_slice(&self.dense.value(t)?))
    }

    /// Largest `|p₀(t) − p₀(0)|` over the samples.
    pub fn momentum_drift(&self) -> f64 {
        let p0 = self.samples[0].momentum;
        self.samples.iter().map(|s| (s.momentum - p0).abs()).fold(0.0, f64::max)
    }

    /// Largest `|g̃(γ̇, γ̇)|` over the samples.
    pub fn max_null_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.null_defect.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct LiftOptions {
    pub tol: Tolerances,
    pub t_max: f64,
    pub output_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { tol: Tolerances::default(), t_max: 1.0, output_step: None, max_steps: 1_000_000 }
    }
}

/// Integrates the lifted geodesic from `st` on `[0, t_max]`; stops early if
/// `ω(ξ)` approaches zero.
pub fn integrate_lift(l: &LiftMetric, st: &LiftState, opts: &LiftOptions) -> Result<LiftTrajectory> {
    let s = &l.base;
    let n = s.dim();
    if st.x.len() != n || st.xi.len() != n {
        return Err(Error::DimensionMismatch(format!("structure has dimension {n}")));
    }
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let d = lift_geodesic_rhs(l, &LiftState::from_slice(y))?;
        dy.copy_from_slice(&d.to_vec());
        Ok(())
    };
    let sign0 = st.momentum(s).signum();
    let events = [Event::new(Termination::KernelApproach, move |_t, y: &[f64], _dy: &[f64]| {
        let omega = s.oneform(&DVector::from_column_slice(&y[1..n + 1]));
        let xi = DVector::from_column_slice(&y[n + 2..]);
        sign0 * omega.dot(&xi) - EPS_OMEGA * omega.norm() * xi.norm()
    })];
    let ode_opts = AdaptiveOptions { tol: opts.tol, max_steps: opts.max_steps, ..Default::default() };
    let sol = integrate_adaptive(&rhs, &st.to_vec(), 0.0, opts.t_max, &ode_opts, &events)?;
    let meta = TrajectoryMeta {
        label: s.label().to_string(),
        kind: "lift".into(),
        gauge: Some(Gauge::OmegaConstant),
        tolerances: Some(opts.tol),
        termination: sol.termination.clone(),
        stats: sol.stats,
    };
    let sample = |t: f64, y: &[f64]| {
        let state = LiftState::from_slice(y);
        LiftSample { t, momentum: state.momentum(s), null_defect: state.null_defect(s), state }
    };
    let samples = match opts.output_step {
        Some(dt) => {
            let span = (sol.ts[0], *sol.ts.last().unwrap_or(&0.0));
            let mut out = Vec::new();
            for t in crate::trajectory::uniform_times(span, dt) {
                out.push(sample(t, &sol.dense.value(t)?));
            }
            out
        }
        None => sol.ts.iter().zip(&sol.ys).map(|(t, y)| sample(*t, y)).collect(),
    };
    Ok(LiftTrajectory { samples, meta, ts: sol.ts, ys: sol.ys, dense: sol.dense, structure: s.clone() })
}

/// Drops `(x⁰, ξ⁰)`; diagnostics are recomputed on the base. Fails if any
/// sample has `|ω(ξ)|` inside the kernel guard.
pub fn project_and_check(lift: &LiftTrajectory) -> Result<Trajectory> {
    let s = &lift.structure;
    let n = s.dim();
    for p in &lift.samples {
        let omega = s.oneform(&p.state.x);
        if p.momentum.abs() <= EPS_OMEGA * omega.norm() * p.state.xi.norm() {
            return Err(Error::KernelApproach { t: p.t });
        }
    }
    let times: Vec<f64> = lift.samples.iter().map(|p| p.t).collect();
    let ys: Vec<Vec<f64>> = lift.samples.iter().map(|p| p.state.to_vec()).collect();
    let dense = DenseMap { output: lift.dense.clone(), x_offset: 1, xi_offset: n + 2, n };
    build_trajectory(s, &times, &ys, lift.meta.clone(), dense, None, |y| {
        (DVector::from_column_slice(&y[1..n + 1]), DVector::from_column_slice(&y[n + 2..]))
    })
}

/// Null lift, integration and projection in one call.
pub fn lift_trace(s: &KropinaStructure, x: &Point, xi: &Tangent, opts: &LiftOptions) -> Result<(LiftTrajectory, Trajectory)> {
    let l = lift_metric(s, x)?;
    let st = null_initial_lift(s, x, xi, 0.0)?;
    let lt = integrate_lift(&l, &st, opts)?;
    let proj = project_and_check(&lt)?;
    Ok((lt, proj))
}

impl LiftTrajectory {
    pub fn stats(&self) -> Stats {
        self.meta.stats
    }

    pub fn knots(&self) -> (&[f64], &[Vec<f64>]) {
        (&self.ts, &self.ys)
    }
}
