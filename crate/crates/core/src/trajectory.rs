//! Time-stamped geodesic samples with recomputed diagnostics and an optional
//! continuous extension.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler_lagrange::Gauge;
use crate::geometry::{KropinaStructure, Point, Tangent};
use crate::linalg::bilinear;
use crate::ode::{DenseOutput, Stats, Termination, Tolerances};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Point,
    pub xi: Tangent,
    /// `F(x, ξ)`, `NaN` when `ω(ξ) = 0`.
    pub f: f64,
    pub omega_xi: f64,
}

impl Sample {
    /// Sample with `F` and `ω(ξ)` evaluated from the structure.
    pub fn new(s: &KropinaStructure, t: f64, x: Point, xi: Tangent) -> Self {
        let n = s.dim();
        let c = s.components(x.as_slice());
        let g = DMatrix::from_row_slice(n, n, &c.metric);
        let omega = DVector::from_vec(c.oneform);
        let w = omega.dot(&xi);
        let f = if w == 0.0 { f64::NAN } else { bilinear(&g, &xi, &xi) / w };
        Sample { t, x, xi, f, omega_xi: w }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub label: String,
    /// `el`, `lift` or `file`.
    pub kind: String,
    pub gauge: Option<Gauge>,
    pub tolerances: Option<Tolerances>,
    pub termination: Termination,
    pub stats: Stats,
}

impl TrajectoryMeta {
    pub fn from_file(label: impl Into<String>) -> Self {
        TrajectoryMeta {
            label: label.into(),
            kind: "file".into(),
            gauge: None,
            tolerances: None,
            termination: Termination::Completed,
            stats: Stats::default(),
        }
    }
}

/// Continuous extension of an integrated state vector, with the offsets of
/// the position and velocity blocks.
#[derive(Clone, Debug)]
pub(crate) struct DenseMap {
    pub output: DenseOutput,
    pub x_offset: usize,
    pub xi_offset: usize,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
    dense: Option<Arc<DenseMap>>,
}

impl Trajectory {
    /// Trajectory without a continuous extension; interpolation falls back
    /// to cubic Hermite on `(x, ξ)`.
    pub fn from_samples(samples: Vec<Sample>, meta: TrajectoryMeta) -> Result<Self> {
        validate(&samples)?;
        Ok(Trajectory { samples, meta, dense: None })
    }

    pub(crate) fn with_dense(samples: Vec<Sample>, meta: TrajectoryMeta, dense: DenseMap) -> Self {
        Trajectory { samples, meta, dense: Some(Arc::new(dense)) }
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn span(&self) -> (f64, f64) {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => (f64::NAN, f64::NAN),
        }
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    fn check_span(&self, t: f64) -> Result<()> {
        let (a, b) = self.span();
        let slack = 1e-12 * (b - a).abs().max(1.0);
        if self.samples.is_empty() || t < a - slack || t > b + slack {
            return Err(Error::OutOfSpan { t, start: a, end: b });
        }
        Ok(())
    }

    /// Interpolated `(x, ξ)` at `t`.
    pub fn state_at(&self, t: f64) -> Result<(Point, Tangent)> {
        self.check_span(t)?;
        if let Some(d) = &self.dense {
            let y = d.output.value(t)?;
            let x = DVector::from_column_slice(&y[d.x_offset..d.x_offset + d.n]);
            let xi = DVector::from_column_slice(&y[d.xi_offset..d.xi_offset + d.n]);
            return Ok((x, xi));
        }
        let (k, s, h) = self.hermite_interval(t);
        let (a, b) = (&self.samples[k], &self.samples[(k + 1).min(self.samples.len() - 1)]);
        if h == 0.0 {
            return Ok((a.x.clone(), a.xi.clone()));
        }
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        let x = &a.x * h00 + &a.xi * (h * h10) + &b.x * h01 + &b.xi * (h * h11);
        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s * s - 2.0 * s;
        let xi = (&a.x * d00 + &b.x * d01) / h + &a.xi * d10 + &b.xi * d11;
        Ok((x, xi))
    }

    /// `ξ̇` at `t`: exact derivative of the continuous extension when present,
    /// otherwise the second derivative of the Hermite interpolant.
    pub fn acceleration_at(&self, t: f64) -> Result<Tangent> {
        self.check_span(t)?;
        if let Some(d) = &self.dense {
            let dy = d.output.derivative(t)?;
            return Ok(DVector::from_column_slice(&dy[d.xi_offset..d.xi_offset + d.n]));
        }
        let (k, s, h) = self.hermite_interval(t);
        let (a, b) = (&self.samples[k], &self.samples[(k + 1).min(self.samples.len() - 1)]);
        if h == 0.0 {
            return Ok(DVector::zeros(a.x.len()));
        }
        let e00 = 12.0 * s - 6.0;
        let e10 = 6.0 * s - 4.0;
        let e11 = 6.0 * s - 2.0;
        Ok((&a.x * e00 - &b.x * e00) / (h * h) + (&a.xi * e10 + &b.xi * e11) / h)
    }

    fn hermite_interval(&self, t: f64) -> (usize, f64, f64) {
        let m = self.samples.len();
        if m == 1 {
            return (0, 0.0, 0.0);
        }
        let idx = self.samples.partition_point(|s| s.t <= t).clamp(1, m - 1) - 1;
        let h = self.samples[idx + 1].t - self.samples[idx].t;
        (idx, ((t - self.samples[idx].t) / h).clamp(0.0, 1.0), h)
    }

    /// Samples at the given times with diagnostics recomputed from `s`.
    pub fn resample(&self, s: &KropinaStructure, times: &[f64]) -> Result<Trajectory> {
        resample_dense(self, s, times)
    }

    /// Samples on `t0, t0 + dt, …` plus the final time.
    pub fn uniform(&self, s: &KropinaStructure, dt: f64) -> Result<Trajectory> {
        let times = uniform_times(self.span(), dt);
        resample_dense(self, s, &times)
    }
}

pub(crate) fn uniform_times((a, b): (f64, f64), dt: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let steps = ((b - a) / dt).floor() as usize;
    for k in 0..=steps {
        let t = a + k as f64 * dt;
        if t < b - 1e-12 * dt {
            times.push(t);
        }
    }
    times.push(b);
    times
}

fn validate(samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("trajectory has no samples".into()));
    }
    let n = samples[0].x.len();
    for w in samples.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::InvalidInput(format!("sample times not strictly increasing at t = {}", w[1].t)));
        }
    }
    for s in samples {
        if s.x.len() != n || s.xi.len() != n {
            return Err(Error::DimensionMismatch("sample dimensions differ".into()));
        }
        if !s.t.is_finite() || s.x.iter().chain(s.xi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at t = {}", s.t)));
        }
    }
    Ok(())
}

/// Interpolated samples at `times` (each inside the span), diagnostics
/// recomputed from `s`. Knot times reproduce the stored samples.
pub fn resample_dense(traj: &Trajectory, s: &KropinaStructure, times: &[f64]) -> Result<Trajectory> {
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let (x, xi) = match traj.samples.binary_search_by(|p| p.t.total_cmp(&t)) {
            Ok(k) => (traj.samples[k].x.clone(), traj.samples[k].xi.clone()),
            Err(_) => traj.state_at(t)?,
        };
        samples.push(Sample::new(s, t, x, xi));
    }
    validate(&samples)?;
    Ok(Trajectory { samples, meta: traj.meta.clone(), dense: traj.dense.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean;

    fn line() -> (KropinaStructure, Trajectory) {
        let s = euclidean(2, 0);
        let samples = (0..5)
            .map(|k| {
                let t = k as f64 * 0.25;
                Sample::new(&s, t, DVector::from_vec(vec![t, 2.0 * t]), DVector::from_vec(vec![1.0, 2.0]))
            })
            .collect();
        let traj = Trajectory::from_samples(samples, TrajectoryMeta::from_file("line")).unwrap();
        (s, traj)
    }

    #[test]
    fn resample_at_knots_is_identity() {
        let (s, traj) = line();
        let times: Vec<f64> = traj.samples.iter().map(|p| p.t).collect();
        let r = resample_dense(&traj, &s, &times).unwrap();
        assert_eq!(r.samples, traj.samples);
    }

    #[test]
    fn straight_line_midpoints_are_exact() {
        let (s, traj) = line();
        let times: Vec<f64> = (0..4).map(|k| 0.125 + 0.25 * k as f64).collect();
        let r = resample_dense(&traj, &s, &times).unwrap();
        for p in &r.samples {
            assert!((p.x[0] - p.t).abs() < 1e-12 && (p.x[1] - 2.0 * p.t).abs() < 1e-12);
            assert!((p.xi[1] - 2.0).abs() < 1e-12);
            assert!((p.f - 5.0).abs() < 1e-12);
        }
        assert!(traj.acceleration_at(0.3).unwrap().norm() < 1e-12);
    }

    #[test]
    fn out_of_span_is_reported() {
        let (s, traj) = line();
        assert!(matches!(resample_dense(&traj, &s, &[1.5]), Err(Error::OutOfSpan { .. })));
    }

    #[test]
    fn unsorted_samples_rejected() {
        let (_, traj) = line();
        let mut samples = traj.samples.clone();
        samples.swap(1, 2);
        assert!(Trajectory::from_samples(samples, TrajectoryMeta::from_file("x")).is_err());
    }

    #[test]
    fn uniform_grid_includes_end() {
        let t = uniform_times((0.0, 1.0), 0.3);
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        let t = uniform_times((0.0, 1.0), 0.25);
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
