//! Dormand–Prince 5(4) integration with PI step control, continuous
//! (dense) output, and event detection; fixed-step RK4 and DOPRI5 for
//! convergence studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side `dy = f(t, y)`; an `Err` makes the integrator retry with a
/// smaller step.
pub trait Rhs {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F: Fn(f64, &[f64], &mut [f64]) -> Result<()>> Rhs for F {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason", content = "detail")]
pub enum Termination {
    Completed,
    KernelApproach,
    AccelerationCap,
    LeftBox,
    StepSizeUnderflow,
    MaxSteps,
    RhsFailure(String),
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Completed => write!(f, "completed"),
            Termination::KernelApproach => write!(f, "kernel-approach"),
            Termination::AccelerationCap => write!(f, "acceleration-cap"),
            Termination::LeftBox => write!(f, "left-box"),
            Termination::StepSizeUnderflow => write!(f, "step-size-underflow"),
            Termination::MaxSteps => write!(f, "max-steps"),
            Termination::RhsFailure(m) => write!(f, "rhs-failure: {m}"),
        }
    }
}

/// Stops integration where `f(t, y, y')` first becomes `≤ 0`.
pub struct Event<'a> {
    pub reason: Termination,
    #[allow(clippy::type_complexity)]
    pub f: Box<dyn Fn(f64, &[f64], &[f64]) -> f64 + 'a>,
}

impl<'a> Event<'a> {
    pub fn new(reason: Termination, f: impl Fn(f64, &[f64], &[f64]) -> f64 + 'a) -> Self {
        Event { reason, f: Box::new(f) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-12 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Clone, Debug)]
pub struct AdaptiveOptions {
    pub tol: Tolerances,
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { tol: Tolerances::default(), h0: None, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

/// One step's continuous extension (fourth order).
#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    /// End of validity; below `t0 + h` when an event truncated the step.
    t_end: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn theta(&self, t: f64) -> f64 {
        if self.h == 0.0 {
            0.0
        } else {
            (t - self.t0) / self.h
        }
    }

    fn value(&self, t: f64, out: &mut [f64]) {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    fn derivative(&self, t: f64, out: &mut [f64]) {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let [_, r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            let s = r4[i] + th1 * r5[i];
            let ds = -r5[i];
            let r = r3[i] + th * s;
            let dr = s + th * ds;
            let q = r2[i] + th1 * r;
            let dq = -r + th1 * dr;
            out[i] = (q + th * dq) / self.h;
        }
    }
}

/// Piecewise continuous extension over all accepted steps.
#[derive(Clone, Debug, Default)]
pub struct DenseOutput {
    segments: Vec<Segment>,
    dim: usize,
}

impl DenseOutput {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        Some((first.t0, last.t_end))
    }

    fn locate(&self, t: f64) -> Result<&Segment> {
        let (a, b) = self.span().ok_or(Error::OutOfSpan { t, start: f64::NAN, end: f64::NAN })?;
        let slack = 1e-12 * (b - a).abs().max(1.0);
        if !(t >= a - slack && t <= b + slack) {
            return Err(Error::OutOfSpan { t, start: a, end: b });
        }
        let idx = self.segments.partition_point(|s| s.t_end < t);
        Ok(&self.segments[idx.min(self.segments.len() - 1)])
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        let seg = self.locate(t)?;
        let mut out = vec![0.0; self.dim];
        seg.value(t, &mut out);
        Ok(out)
    }

    pub fn derivative(&self, t: f64) -> Result<Vec<f64>> {
        let seg = self.locate(t)?;
        let mut out = vec![0.0; self.dim];
        seg.derivative(t, &mut out);
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub ts: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub dense: DenseOutput,
    pub stats: Stats,
    pub termination: Termination,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
    err: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y1: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

fn combo(y: &[f64], h: f64, terms: &[(f64, &[f64])], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// One DOPRI5 step from `(t, y)` with `k[0] = f(t, y)` precomputed. Fills
/// `w.y1`, `w.err` and `w.k[6] = f(t + h, y1)`.
fn dopri_step(f: &dyn Rhs, t: f64, y: &[f64], h: f64, w: &mut Work) -> Result<()> {
    let Work { k, tmp, y1, err } = w;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    combo(y, h, &[(A21, k1)], tmp);
    f.eval(t + C2 * h, tmp, k2)?;
    combo(y, h, &[(A31, k1), (A32, k2)], tmp);
    f.eval(t + C3 * h, tmp, k3)?;
    combo(y, h, &[(A41, k1), (A42, k2), (A43, k3)], tmp);
    f.eval(t + C4 * h, tmp, k4)?;
    combo(y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], tmp);
    f.eval(t + C5 * h, tmp, k5)?;
    combo(y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], tmp);
    f.eval(t + h, tmp, k6)?;
    combo(y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)], y1);
    f.eval(t + h, y1, k7)?;
    for i in 0..y.len() {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(())
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], tol: &Tolerances) -> f64 {
    let n = y0.len().max(1) as f64;
    let sum: f64 = (0..y0.len())
        .map(|i| {
            let sk = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn rms_scaled(v: &[f64], y: &[f64], tol: &Tolerances) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = v.iter().zip(y).map(|(a, b)| (a / (tol.atol + tol.rtol * b.abs())).powi(2)).sum();
    (s / n).sqrt()
}

/// Standard starting-step heuristic for a fifth-order method.
fn initial_step(f: &dyn Rhs, t: f64, y: &[f64], f0: &[f64], dir: f64, tol: &Tolerances, h_max: f64) -> Result<f64> {
    let d0 = rms_scaled(y, y, tol);
    let d1 = rms_scaled(f0, y, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f.eval(t + dir * h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&diff, y, tol) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(1.0 / 5.0) };
    Ok((100.0 * h0).min(h1).min(h_max))
}

/// Integrates `y' = f(t, y)` on `[t0, t1]` (`t1 > t0`) with adaptive DOPRI5.
/// Stops early at the first event crossing, located on the dense output.
pub fn integrate_adaptive(
    f: &dyn Rhs,
    y0: &[f64],
    t0: f64,
    t1: f64,
    opts: &AdaptiveOptions,
    events: &[Event<'_>],
) -> Result<OdeSolution> {
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("integration span [{t0}, {t1}] is empty")));
    }
    let n = y0.len();
    let tol = &opts.tol;
    let mut stats = Stats::default();
    let mut w = Work::new(n);
    f.eval(t0, y0, &mut w.k[0])?;
    stats.rhs_evals += 1;
    for ev in events {
        if (ev.f)(t0, y0, &w.k[0]) <= 0.0 {
            return Err(Error::InvalidInput(format!("initial state already triggers the {} stop", ev.reason)));
        }
    }
    let span = t1 - t0;
    let h_max = opts.h_max.min(span);
    let mut h = match opts.h0 {
        Some(h) => h.min(h_max),
        None => {
            stats.rhs_evals += 1;
            initial_step(f, t0, y0, &w.k[0].clone(), 1.0, tol, h_max)?
        }
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut ts = vec![t0];
    let mut ys = vec![y.clone()];
    let mut dense = DenseOutput { segments: Vec::new(), dim: n };
    let mut facold: f64 = 1e-4;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let safe = 0.9;
    let (facc1, facc2) = (1.0 / 0.2, 1.0 / 10.0);
    let mut last_reject = false;
    let termination;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            termination = Termination::MaxSteps;
            break;
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        let mut last = false;
        if t + 1.01 * h >= t1 {
            h = t1 - t;
            last = true;
        }
        if h < h_min {
            termination = Termination::StepSizeUnderflow;
            break;
        }
        let k1 = w.k[0].clone();
        let step = dopri_step(f, t, &y, h, &mut w);
        stats.rhs_evals += 6;
        if let Err(e) = step {
            w.k[0] = k1;
            stats.rejected += 1;
            h *= 0.25;
            last_reject = true;
            if h < h_min {
                termination = Termination::RhsFailure(e.to_string());
                break;
            }
            continue;
        }
        let err = error_norm(&y, &w.y1, &w.err, tol);
        if !err.is_finite() {
            w.k[0] = k1;
            stats.rejected += 1;
            h *= 0.25;
            last_reject = true;
            continue;
        }
        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(beta) / safe).clamp(facc2, facc1);
            let mut h_new = (h / fac).min(h_max);
            facold = err.max(1e-4);
            if last_reject {
                h_new = h_new.min(h);
            }
            last_reject = false;
            let t_new = if last { t1 } else { t + h };
            let mut seg = build_segment(t, h, &y, &w, &k1);
            seg.t_end = t_new;
            stats.accepted += 1;
            // events on the continuous extension
            let mut hit: Option<(usize, f64)> = None;
            for (idx, ev) in events.iter().enumerate() {
                if (ev.f)(t_new, &w.y1, &w.k[6]) <= 0.0 {
                    let te = locate_event(ev, &seg, t, t_new);
                    if hit.is_none_or(|(_, tb)| te < tb) {
                        hit = Some((idx, te));
                    }
                }
            }
            dense.segments.push(seg);
            if let Some((idx, te)) = hit {
                let yv = dense.value(te)?;
                ts.push(te);
                ys.push(yv);
                if let Some(s) = dense.segments.last_mut() {
                    s.t_end = te;
                }
                termination = events[idx].reason.clone();
                break;
            }
            t = t_new;
            y.copy_from_slice(&w.y1);
            w.k[0] = w.k[6].clone();
            ts.push(t);
            ys.push(y.clone());
            if last {
                termination = Termination::Completed;
                break;
            }
            h = h_new;
        } else {
            w.k[0] = k1;
            stats.rejected += 1;
            h /= facc1.min(fac11 / safe);
            last_reject = true;
        }
    }
    Ok(OdeSolution { ts, ys, dense, stats, termination })
}

fn build_segment(t: f64, h: f64, y: &[f64], w: &Work, k1: &[f64]) -> Segment {
    let n = y.len();
    let [_, _, k3, k4, k5, k6, k7] = &w.k;
    let mut r = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        let ydiff = w.y1[i] - y[i];
        let bspl = h * k1[i] - ydiff;
        r[0][i] = y[i];
        r[1][i] = ydiff;
        r[2][i] = bspl;
        r[3][i] = ydiff - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Segment { t0: t, h, t_end: t + h, r }
}

fn locate_event(ev: &Event<'_>, seg: &Segment, ta: f64, tb: f64) -> f64 {
    let n = seg.r[0].len();
    let mut y = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let mut g = |t: f64| {
        seg.value(t, &mut y);
        seg.derivative(t, &mut dy);
        (ev.f)(t, &y, &dy)
    };
    let (mut a, mut b) = (ta, tb);
    if g(a) <= 0.0 {
        return a;
    }
    let tol = 1e-13 * tb.abs().max(1.0);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if g(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedMethod {
    Rk4,
    Dopri5,
}

impl FixedMethod {
    pub fn order(self) -> u32 {
        match self {
            FixedMethod::Rk4 => 4,
            FixedMethod::Dopri5 => 5,
        }
    }
}

/// Integrates with `steps` equal steps; returns the final state.
pub fn integrate_fixed(f: &dyn Rhs, y0: &[f64], t0: f64, t1: f64, steps: usize, method: FixedMethod) -> Result<Vec<f64>> {
    if steps == 0 {
        return Ok(y0.to_vec());
    }
    let n = y0.len();
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut w = Work::new(n);
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        f.eval(t, &y, &mut w.k[0])?;
        match method {
            FixedMethod::Dopri5 => {
                dopri_step(f, t, &y, h, &mut w)?;
                y.copy_from_slice(&w.y1);
            }
            FixedMethod::Rk4 => {
                let Work { k, tmp, .. } = &mut w;
                let [k1, k2, k3, k4, ..] = k;
                combo(&y, 0.5 * h, &[(1.0, k1)], tmp);
                f.eval(t + 0.5 * h, tmp, k2)?;
                combo(&y, 0.5 * h, &[(1.0, k2)], tmp);
                f.eval(t + 0.5 * h, tmp, k3)?;
                combo(&y, h, &[(1.0, k3)], tmp);
                f.eval(t + h, tmp, k4)?;
                for i in 0..n {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }
    Ok(y)
}
