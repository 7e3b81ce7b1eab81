//! The singular geodesic system `A(ξ)η = b(ξ)` of a Kropina metric.
//!
//! With `s = ω(ξ)`, `u = gξ`, `q = g(ξ,ξ)`:
//!
//! ```text
//! A = g − (u ωᵀ + ω uᵀ)/s + q ω ωᵀ/s²
//! 2b_k = −2(∂_m g_kj)ξ^mξ^j + (∂_k g_ij)ξ^iξ^j
//!        + [ω_k (∂_m g_ij)ξ^mξ^iξ^j + 2u_k (∂_m ω_l)ξ^mξ^l
//!           + q (∂_m ω_k)ξ^m − q (∂_k ω_l)ξ^l]/s
//!        − 2 q ω_k (∂_m ω_l)ξ^mξ^l / s²
//! ```
//!
//! `Aξ = 0` and `ker A = ℝξ` off `ker ω`, so solutions form a line
//! `η* + ℝξ`; a gauge picks one point on it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{checked_omega, Jet, KropinaStructure, Point, Tangent, EPS_OMEGA};
use crate::linalg::orthogonal_complement;
use crate::ode::{integrate_adaptive, AdaptiveOptions, Event, Termination, Tolerances};
use crate::trajectory::{uniform_times, DenseMap, Sample, Trajectory, TrajectoryMeta};

/// Relative residual bound for the deflated solve.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Gauge {
    /// `ω(ξ)` constant along the curve.
    #[default]
    #[serde(rename = "omega-const")]
    OmegaConstant,
    /// `F(ξ) = 1`, maintained as `g(ξ,ξ) − ω(ξ) = 0`.
    #[serde(rename = "f-arclength")]
    FArclength,
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gauge::OmegaConstant => "omega-const",
            Gauge::FArclength => "f-arclength",
        })
    }
}

impl FromStr for Gauge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega-const" | "omega-constant" => Ok(Gauge::OmegaConstant),
            "f-arclength" | "arclength" => Ok(Gauge::FArclength),
            _ => Err(Error::InvalidInput(format!("unknown gauge `{s}` (expected omega-const or f-arclength)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicState {
    pub x: Point,
    pub xi: Tangent,
}

impl GeodesicState {
    pub fn new(x: Point, xi: Tangent) -> Self {
        GeodesicState { x, xi }
    }
}

/// Christoffel symbols `Γ_ij^k`, stored at `(i·n + j)·n + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel { n, data: vec![0.0; n * n * n] }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    /// `Γ_ij^k v^i v^j`.
    pub fn contract(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.get(i, j, k) * v[i] * v[j];
                }
            }
            acc
        })
    }

    /// Largest `|Γ_ij^k − Γ_ji^k|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.get(i, j, k) - self.get(j, i, k)).abs());
                }
            }
        }
        worst
    }
}

pub(crate) fn invert(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = g.norm();
    let lu = g.clone().lu();
    if scale == 0.0 || lu.determinant().abs() <= 1e-14 * scale.powi(g.nrows() as i32) {
        return Err(Error::DegenerateMetric);
    }
    lu.try_inverse().ok_or(Error::DegenerateMetric)
}

pub(crate) fn levi_civita_from_jet(jet: &Jet) -> Result<Christoffel> {
    let n = jet.metric.nrows();
    let ginv = invert(&jet.metric)?;
    let mut out = Christoffel::zeros(n);
    // lowered Γ_{ij,l} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut low = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            for (l, v) in low.iter_mut().enumerate() {
                *v = 0.5 * (jet.dmetric[i][(j, l)] + jet.dmetric[j][(i, l)] - jet.dmetric[l][(i, j)]);
            }
            for k in 0..n {
                let val: f64 = (0..n).map(|l| ginv[(k, l)] * low[l]).sum();
                out.set(i, j, k, val);
                out.set(j, i, k, val);
            }
        }
    }
    Ok(out)
}

/// `Γ^g_ij^k = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn levi_civita_symbols(s: &KropinaStructure, x: &Point) -> Result<Christoffel> {
    levi_civita_from_jet(&s.jet(x))
}

/// Scalars shared by the system, the solve and the gauge.
#[derive(Clone, Copy, Debug)]
struct Contractions {
    /// `ω(ξ)`
    s: f64,
    /// `g(ξ,ξ)`
    q: f64,
    /// `(∂_k g_ij)ξ^kξ^iξ^j`
    c: f64,
    /// `(∂_k ω_l)ξ^kξ^l`
    w2: f64,
}

#[derive(Clone, Debug)]
pub struct ELSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub base: Point,
    pub velocity: Tangent,
}

fn assemble_from_jet(jet: &Jet, x: &Point, xi: &Tangent) -> Result<(ELSystem, Contractions)> {
    let n = xi.len();
    let g = &jet.metric;
    let omega = &jet.oneform;
    let s = checked_omega(omega, xi)?;
    let u = g * xi;
    let q = xi.dot(&u);
    let mut dg_xi = DMatrix::zeros(n, n);
    for m in 0..n {
        dg_xi += &jet.dmetric[m] * xi[m];
    }
    let dg_xi_xi = &dg_xi * xi;
    let c = xi.dot(&dg_xi_xi);
    let e = DVector::from_fn(n, |k, _| xi.dot(&(&jet.dmetric[k] * xi)));
    let om = &jet.doneform;
    let om_xi = om * xi; // (∂_k ω_l)ξ^l
    let omt_xi = om.transpose() * xi; // (∂_m ω_k)ξ^m
    let w2 = xi.dot(&om_xi);
    let a = g - (&u * omega.transpose() + omega * u.transpose()) / s + (omega * omega.transpose()) * (q / (s * s));
    let two_b = -2.0 * dg_xi_xi + e + (omega * c + &u * (2.0 * w2) + (omt_xi - om_xi) * q) / s
        - omega * (2.0 * q * w2 / (s * s));
    let sys = ELSystem { a, b: two_b * 0.5, base: x.clone(), velocity: xi.clone() };
    Ok((sys, Contractions { s, q, c, w2 }))
}

/// `A(ξ)` and `b(ξ)` in the current chart.
pub fn assemble_el_system(s: &KropinaStructure, x: &Point, xi: &Tangent) -> Result<ELSystem> {
    Ok(assemble_from_jet(&s.jet(x), x, xi)?.0)
}

/// The solution of `Aη = b` Euclidean-orthogonal to `ξ`, by restricting to
/// `ξ^⊥` where `A` is invertible.
pub fn min_norm_acceleration(sys: &ELSystem) -> Result<Tangent> {
    let n = sys.velocity.len();
    if n == 1 {
        return Ok(DVector::zeros(1));
    }
    let c = orthogonal_complement(&sys.velocity);
    let reduced = c.transpose() * &sys.a * &c;
    let rhs = c.transpose() * &sys.b;
    let y = reduced
        .clone()
        .lu()
        .solve(&rhs)
        .or_else(|| reduced.col_piv_qr().solve(&rhs))
        .ok_or(Error::InconsistentSystem { residual: f64::INFINITY, bound: 0.0 })?;
    let eta = c * y;
    let residual = (&sys.a * &eta - &sys.b).norm();
    let bound = SOLVE_TOL * sys.b.norm().max(sys.a.norm() * eta.norm());
    if !(residual <= bound) && residual > f64::MIN_POSITIVE {
        return Err(Error::InconsistentSystem { residual, bound });
    }
    Ok(eta)
}

fn gauge_lambda(g: &DMatrix<f64>, omega: &DVector<f64>, xi: &Tangent, eta_p: &Tangent, k: Contractions, gauge: Gauge) -> Result<f64> {
    match gauge {
        Gauge::OmegaConstant => Ok(-(omega.dot(eta_p) + k.w2) / k.s),
        Gauge::FArclength => {
            if k.q <= 0.0 {
                return Err(Error::GaugeSingular { g_xi_xi: k.q });
            }
            let coeff = 2.0 * k.q - k.s;
            if coeff.abs() <= EPS_OMEGA * (k.q.abs() + k.s.abs()) {
                return Err(Error::GaugeSingular { g_xi_xi: k.q });
            }
            let u = g * xi;
            Ok((omega.dot(eta_p) + k.w2 - k.c - 2.0 * u.dot(eta_p)) / coeff)
        }
    }
}

/// Shifts `η_p` along `ξ` so that the gauge quantity is stationary.
pub fn gauge_fix(s: &KropinaStructure, x: &Point, xi: &Tangent, eta_particular: &Tangent, gauge: Gauge) -> Result<Tangent> {
    let jet = s.jet(x);
    let (_, k) = assemble_from_jet(&jet, x, xi)?;
    let lambda = gauge_lambda(&jet.metric, &jet.oneform, xi, eta_particular, k, gauge)?;
    Ok(eta_particular + xi * lambda)
}

pub(crate) fn rhs_from_jet(jet: &Jet, x: &Point, xi: &Tangent, gauge: Gauge) -> Result<Tangent> {
    let (sys, k) = assemble_from_jet(jet, x, xi)?;
    let eta = min_norm_acceleration(&sys)?;
    let lambda = gauge_lambda(&jet.metric, &jet.oneform, xi, &eta, k, gauge)?;
    Ok(eta + xi * lambda)
}

/// `(ẋ, ξ̇) = (ξ, η)` with `η` the gauge-fixed acceleration.
pub fn geodesic_rhs(s: &KropinaStructure, st: &GeodesicState, gauge: Gauge) -> Result<(Tangent, Tangent)> {
    let jet = s.jet(&st.x);
    let eta = rhs_from_jet(&jet, &st.x, &st.xi, gauge)?;
    Ok((st.xi.clone(), eta))
}

/// Axis-aligned box in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn cube(center: &[f64], half: f64) -> Self {
        Bounds { lo: center.iter().map(|c| c - half).collect(), hi: center.iter().map(|c| c + half).collect() }
    }

    /// Signed distance to the boundary (positive inside).
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..x.len().min(self.lo.len()) {
            m = m.min(x[i] - self.lo[i]).min(self.hi[i] - x[i]);
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub gauge: Gauge,
    pub tol: Tolerances,
    pub t_max: f64,
    pub bounds: Option<Bounds>,
    /// `‖ξ̇‖` stop threshold as a multiple of `max(1, ‖ξ₀‖²)`.
    pub accel_cap: f64,
    /// Uniform output spacing; `None` records every accepted step.
    pub output_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            gauge: Gauge::OmegaConstant,
            tol: Tolerances::default(),
            t_max: 1.0,
            bounds: None,
            accel_cap: 1e8,
            output_step: None,
            max_steps: 1_000_000,
        }
    }
}

impl TraceOptions {
    pub fn new(gauge: Gauge, t_max: f64) -> Self {
        TraceOptions { gauge, t_max, ..Default::default() }
    }

    pub fn with_tol(mut self, rtol: f64, atol: f64) -> Self {
        self.tol = Tolerances::new(rtol, atol);
        self
    }
}

/// Scales `ξ` so that `F(ξ) = 1`; requires `F(ξ) > 0`.
pub fn normalize_to_unit(s: &KropinaStructure, x: &Point, xi: &Tangent) -> Result<Tangent> {
    let f = crate::geometry::eval_f(s, x, xi)?;
    if !(f > 0.0) {
        let q = crate::linalg::bilinear(&s.metric(x), xi, xi);
        return Err(if q <= 0.0 {
            Error::GaugeSingular { g_xi_xi: q }
        } else {
            Error::InvalidInput(format!("arclength gauge needs F(ξ) > 0, got {f:e}"))
        });
    }
    Ok(xi / f)
}

/// Integrates the geodesic from `(x0, ξ0)` on `[0, t_max]`. In the arclength
/// gauge `ξ0` is first rescaled to `F = 1`. Kernel approach, the
/// acceleration cap and leaving `bounds` end the run early with the reason
/// recorded in the metadata.
pub fn integrate_geodesic(s: &KropinaStructure, x0: &Point, xi0: &Tangent, opts: &TraceOptions) -> Result<Trajectory> {
    let n = s.dim();
    if x0.len() != n || xi0.len() != n {
        return Err(Error::DimensionMismatch(format!("structure has dimension {n}")));
    }
    checked_omega(&s.oneform(x0), xi0)?;
    let xi0 = match opts.gauge {
        Gauge::OmegaConstant => xi0.clone(),
        Gauge::FArclength => normalize_to_unit(s, x0, xi0)?,
    };
    let gauge = opts.gauge;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let x = DVector::from_column_slice(&y[..n]);
        let xi = DVector::from_column_slice(&y[n..]);
        let jet = s.jet(&x);
        let eta = rhs_from_jet(&jet, &x, &xi, gauge)?;
        dy[..n].copy_from_slice(y[n..].as_ref());
        dy[n..].copy_from_slice(eta.as_slice());
        Ok(())
    };
    let sign0 = s.oneform(x0).dot(&xi0).signum();
    let mut events = vec![Event::new(Termination::KernelApproach, move |_t, y: &[f64], _dy: &[f64]| {
        let omega = s.oneform(&DVector::from_column_slice(&y[..n]));
        let xi = DVector::from_column_slice(&y[n..]);
        sign0 * omega.dot(&xi) - EPS_OMEGA * omega.norm() * xi.norm()
    })];
    let cap = opts.accel_cap * xi0.norm_squared().max(1.0);
    events.push(Event::new(Termination::AccelerationCap, move |_t, _y: &[f64], dy: &[f64]| {
        cap - dy[n..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }));
    if let Some(b) = &opts.bounds {
        if b.margin(x0.as_slice()) <= 0.0 {
            return Err(Error::InvalidInput("initial point lies outside the bounds".into()));
        }
        let b = b.clone();
        events.push(Event::new(Termination::LeftBox, move |_t, y: &[f64], _dy: &[f64]| b.margin(&y[..n])));
    }
    let mut y0 = x0.as_slice().to_vec();
    y0.extend_from_slice(xi0.as_slice());
    let ode_opts = AdaptiveOptions { tol: opts.tol, max_steps: opts.max_steps, ..Default::default() };
    let sol = integrate_adaptive(&rhs, &y0, 0.0, opts.t_max, &ode_opts, &events)?;
    let meta = TrajectoryMeta {
        label: s.label().to_string(),
        kind: "el".into(),
        gauge: Some(gauge),
        tolerances: Some(opts.tol),
        termination: sol.termination.clone(),
        stats: sol.stats,
    };
    let dense = DenseMap { output: sol.dense, x_offset: 0, xi_offset: n, n };
    build_trajectory(s, &sol.ts, &sol.ys, meta, dense, opts.output_step, |y| {
        (DVector::from_column_slice(&y[..n]), DVector::from_column_slice(&y[n..]))
    })
}

pub(crate) fn build_trajectory(
    s: &KropinaStructure,
    ts: &[f64],
    ys: &[Vec<f64>],
    meta: TrajectoryMeta,
    dense: DenseMap,
    output_step: Option<f64>,
    split: impl Fn(&[f64]) -> (Point, Tangent),
) -> Result<Trajectory> {
    let mut samples: Vec<Sample> = Vec::with_capacity(ts.len());
    let push = |samples: &mut Vec<Sample>, t: f64, y: &[f64]| {
        let (x, xi) = split(y);
        samples.push(Sample::new(s, t, x, xi));
    };
    match output_step {
        Some(dt) if ts.len() > 1 => {
            let span = (ts[0], *ts.last().unwrap_or(&ts[0]));
            for t in uniform_times(span, dt) {
                let y = if t == span.1 { ys[ys.len() - 1].clone() } else { dense.output.value(t)? };
                push(&mut samples, t, &y);
            }
        }
        _ => {
            for (t, y) in ts.iter().zip(ys) {
                if samples.last().is_some_and(|p: &Sample| p.t >= *t) {
                    continue;
                }
                push(&mut samples, *t, y);
            }
        }
    }
    Ok(Trajectory::with_dense(samples, meta, dense))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr::heisenberg_kropina;
    use crate::geometry::{euclidean, modify_metric, ExprModel, GenericModel};
    use crate::expr::{parse_expr, Expr};
    use crate::real::{Dual, Real};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn model(n: usize, g: &[&str], w: &[&str]) -> ExprModel {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        ExprModel {
            metric: g.iter().map(|e| parse_expr(e, &names).unwrap()).collect(),
            oneform: w.iter().map(|e| parse_expr(e, &names).unwrap()).collect(),
        }
    }

    #[test]
    fn christoffel_of_exponential_metric() {
        let m = model(2, &["exp(2*x1)", "0", "0", "1"], &["1", "0"]);
        let s = KropinaStructure::new(m, "exp");
        let x = v(&[0.3, -0.2]);
        let c = levi_civita_symbols(&s, &x).unwrap();
        // Γ_11^1 = ½ g^{11} ∂_1 g_11 = 1
        assert!((c.get(0, 0, 0) - 1.0).abs() < 1e-14);
        for (i, j, k) in [(0, 0, 1), (0, 1, 0), (1, 1, 0), (1, 1, 1), (0, 1, 1)] {
            assert!(c.get(i, j, k).abs() < 1e-14);
        }
        let e = euclidean(3, 0);
        assert!(levi_civita_symbols(&e, &v(&[1.0, 2.0, 3.0])).unwrap().data.iter().all(|&g| g == 0.0));
        assert_eq!(levi_civita_symbols(&heisenberg_kropina(1), &v(&[0.0; 3])), Err(Error::DegenerateMetric));
    }

    #[test]
    fn euclidean_system() {
        let e = euclidean(3, 0);
        let sys = assemble_el_system(&e, &v(&[0.0; 3]), &v(&[1.0, 0.0, 0.0])).unwrap();
        assert!((sys.a.clone() - DMatrix::from_diagonal(&v(&[0.0, 1.0, 1.0]))).norm() < 1e-15);
        assert_eq!(sys.b.norm(), 0.0);
        assert_eq!(min_norm_acceleration(&sys).unwrap().norm(), 0.0);
        let eta = gauge_fix(&e, &v(&[0.0; 3]), &v(&[1.0, 0.0, 0.0]), &v(&[0.0; 3]), Gauge::OmegaConstant).unwrap();
        assert_eq!(eta.norm(), 0.0);
        let (dx, dxi) = geodesic_rhs(&e, &GeodesicState::new(v(&[0.0; 3]), v(&[1.0, 0.0, 0.0])), Gauge::OmegaConstant).unwrap();
        assert_eq!(dx, v(&[1.0, 0.0, 0.0]));
        assert_eq!(dxi.norm(), 0.0);
        assert!(matches!(assemble_el_system(&e, &v(&[0.0; 3]), &v(&[0.0, 1.0, 0.0])), Err(Error::KernelDirection { .. })));
    }

    #[test]
    fn reeb_direction_is_unaccelerated() {
        let h = heisenberg_kropina(1);
        let st = GeodesicState::new(v(&[0.0; 3]), v(&[0.0, 0.0, 1.0]));
        let sys = assemble_el_system(&h, &st.x, &st.xi).unwrap();
        assert!(sys.b.norm() < 1e-15);
        let (dx, dxi) = geodesic_rhs(&h, &st, Gauge::OmegaConstant).unwrap();
        assert_eq!(dx, st.xi);
        assert!(dxi.norm() < 1e-15);
    }

    /// Euler–Lagrange operator of `F = ξᵀgξ/ω(ξ)` by nested dual numbers:
    /// `(∂²F/∂ξ∂ξ) η + (∂²F/∂ξ∂x) ξ − ∂F/∂x`.
    fn el_operator(m: &ExprModel, x: &[f64], xi: &[f64], eta: &[f64]) -> Vec<f64> {
        type D2 = Dual<Dual<f64>>;
        let n = x.len();
        let f = |x: &[D2], xi: &[D2]| -> D2 {
            let c = m.components_generic(x);
            let mut q = D2::zero();
            let mut w = D2::zero();
            for i in 0..n {
                w = w + c.oneform[i] * xi[i];
                for j in 0..n {
                    q = q + c.metric[i * n + j] * xi[i] * xi[j];
                }
            }
            q / w
        };
        let lift = |v: &[f64]| -> Vec<D2> { v.iter().map(|&a| D2::constant(a)).collect() };
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            // ∂F/∂x_k
            let mut xs = lift(x);
            xs[k].re.eps = 1.0;
            acc -= f(&xs, &lift(xi)).re.eps;
            // Σ_j ∂²F/∂ξ_k∂ξ_j η_j + Σ_m ∂²F/∂ξ_k∂x_m ξ_m, as one mixed directional derivative
            let mut xs = lift(x);
            let mut vs = lift(xi);
            vs[k].re.eps = 1.0;
            for j in 0..n {
                vs[j].eps.re = eta[j];
                xs[j].eps.re = xi[j];
            }
            acc += f(&xs, &vs).eps.eps;
            out[k] = acc;
        }
        out
    }

    #[test]
    fn system_matches_direct_euler_lagrange_operator() {
        let m = model(
            3,
            &["2 + x1^2", "0.3*x2", "0.1*sin(x3)", "0.3*x2", "1 + x3^2", "x1*x3", "0.1*sin(x3)", "x1*x3", "3 + cos(x1)"],
            &["1 + x2", "0.5*x1*x3", "exp(0.2*x2) - 0.5"],
        );
        let s = KropinaStructure::new(m.clone(), "poly");
        let x = [0.2, -0.3, 0.4];
        let xi = [0.7, -0.4, 0.9];
        let sys = assemble_el_system(&s, &v(&x), &v(&xi)).unwrap();
        let w = s.oneform(&v(&x)).dot(&v(&xi));
        for eta in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [-0.3, 0.8, 2.0]] {
            let direct = el_operator(&m, &x, &xi, &eta);
            let ours = (&sys.a * v(&eta) - &sys.b) * (2.0 / w);
            for k in 0..3 {
                assert!((direct[k] - ours[k]).abs() < 1e-11, "{k}: {} vs {}", direct[k], ours[k]);
            }
        }
    }

    #[test]
    fn kernel_and_solution_line() {
        let h = modify_metric(&heisenberg_kropina(1), &Expr::var(2));
        let x = v(&[0.3, -0.1, 0.2]);
        let xi = v(&[0.4, 1.0, 0.7]);
        let sys = assemble_el_system(&h, &x, &xi).unwrap();
        assert!((&sys.a * &xi).norm() <= 1e-12 * sys.a.norm() * xi.norm());
        let eta = min_norm_acceleration(&sys).unwrap();
        assert!(eta.dot(&xi).abs() < 1e-12 * eta.norm().max(1.0));
        let shifted = &eta + &xi;
        assert!((&sys.a * &shifted - &sys.b).norm() <= 1e-10 * sys.b.norm().max(sys.a.norm() * shifted.norm()));
        for gauge in [Gauge::OmegaConstant, Gauge::FArclength] {
            let fixed = gauge_fix(&h, &x, &xi, &eta, gauge).unwrap();
            assert!((&sys.a * &fixed - &sys.b).norm() <= 1e-9 * sys.b.norm().max(1.0));
        }
    }

    #[test]
    fn arclength_gauge_refuses_null_vectors() {
        let h = heisenberg_kropina(1);
        let err = gauge_fix(&h, &v(&[0.0; 3]), &v(&[0.0, 0.0, 1.0]), &v(&[0.0; 3]), Gauge::FArclength).unwrap_err();
        assert!(matches!(err, Error::GaugeSingular { .. }));
    }

    #[test]
    fn euclidean_line_integrates_exactly() {
        let e = euclidean(3, 0);
        let t = integrate_geodesic(&e, &v(&[0.0; 3]), &v(&[1.0, 0.0, 0.0]), &TraceOptions::default()).unwrap();
        assert_eq!(t.meta.termination, Termination::Completed);
        let end = t.last();
        assert!((&end.x - v(&[1.0, 0.0, 0.0])).norm() < 1e-10);
        assert_eq!(end.t, 1.0);
    }

    #[test]
    fn gauges_are_preserved() {
        let h = heisenberg_kropina(1);
        let x0 = v(&[0.0; 3]);
        let opts = TraceOptions::new(Gauge::OmegaConstant, 1.0).with_tol(1e-10, 1e-12);
        let t = integrate_geodesic(&h, &x0, &v(&[1.0, 0.0, 1.0]), &opts).unwrap();
        let w0 = t.first().omega_xi;
        assert!(t.samples.iter().all(|p| (p.omega_xi - w0).abs() <= 1e-8));
        let m = modify_metric(&h, &Expr::var(2));
        let opts = TraceOptions::new(Gauge::FArclength, 1.0).with_tol(1e-10, 1e-12);
        let t = integrate_geodesic(&m, &x0, &v(&[1.0, 0.0, 0.5]), &opts).unwrap();
        assert_eq!(t.meta.termination, Termination::Completed);
        assert!(t.samples.iter().all(|p| (p.f - 1.0).abs() <= 1e-8 * p.omega_xi.abs().max(1.0)));
    }

    #[test]
    fn reeb_orbit_stays_on_axis() {
        let h = heisenberg_kropina(1);
        let t = integrate_geodesic(&h, &v(&[0.0; 3]), &v(&[0.0, 0.0, 1.0]), &TraceOptions::default()).unwrap();
        for p in &t.samples {
            assert!(p.x[0].abs() + p.x[1].abs() <= 1e-9);
        }
        assert!((t.last().x[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_exit_is_an_event() {
        let e = euclidean(2, 0);
        let opts = TraceOptions { bounds: Some(Bounds::cube(&[0.0, 0.0], 0.5)), ..TraceOptions::new(Gauge::OmegaConstant, 2.0) };
        let t = integrate_geodesic(&e, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &opts).unwrap();
        assert_eq!(t.meta.termination, Termination::LeftBox);
        assert!((t.last().t - 0.5).abs() < 1e-9);
    }

    #[test]
    fn gauge_fix_ignores_kernel_shifts() {
        let h = heisenberg_kropina(1);
        let (x, xi) = (v(&[0.2, -0.1, 0.3]), v(&[0.7, 0.4, 1.0]));
        let eta = min_norm_acceleration(&assemble_el_system(&h, &x, &xi).unwrap()).unwrap();
        for gauge in [Gauge::OmegaConstant, Gauge::FArclength] {
            let base = gauge_fix(&h, &x, &xi, &eta, gauge).unwrap();
            for mu in [-2.0, 0.5, 3.0] {
                let shifted = gauge_fix(&h, &x, &xi, &(&eta + &xi * mu), gauge).unwrap();
                assert!((&shifted - &base).norm() <= 1e-12 * (1.0 + base.norm()));
            }
        }
    }
}
