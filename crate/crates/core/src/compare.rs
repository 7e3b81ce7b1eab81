//! Trajectory comparison: parameter-wise sup distance and the discrete
//! Fréchet distance of arc-length resampled traces.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::trajectory::Trajectory;

/// Simpson panels per sample interval when tabulating arc length.
const PANELS: usize = 4;
const NEWTON_ITERS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMetric {
    Sup,
    Frechet,
}

impl fmt::Display for CompareMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompareMetric::Sup => "sup",
            CompareMetric::Frechet => "frechet",
        })
    }
}

impl FromStr for CompareMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" => Ok(CompareMetric::Sup),
            "frechet" => Ok(CompareMetric::Frechet),
            _ => Err(Error::InvalidInput(format!("unknown metric `{s}` (expected sup or frechet)"))),
        }
    }
}

/// `max_t ‖x_a(t) − x_b(t)‖` over the common time span, evaluated at the
/// sample times of both trajectories and the midpoints between them.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let (a0, a1) = a.span();
    let (b0, b1) = b.span();
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if !(hi >= lo) {
        return Err(Error::InvalidInput("trajectories have no common time span".into()));
    }
    let mut times: Vec<f64> = a
        .samples
        .iter()
        .chain(&b.samples)
        .map(|p| p.t)
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    times.push(lo);
    times.push(hi);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mids: Vec<f64> = times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    times.extend(mids);
    let mut worst: f64 = 0.0;
    for t in times {
        let (xa, _) = a.state_at(t)?;
        let (xb, _) = b.state_at(t)?;
        worst = worst.max((xa - xb).norm());
    }
    Ok(worst)
}

/// Cumulative coordinate arc length on a refined time grid.
struct ArcTable<'a> {
    traj: &'a Trajectory,
    times: Vec<f64>,
    arc: Vec<f64>,
}

impl<'a> ArcTable<'a> {
    fn new(traj: &'a Trajectory) -> Result<Self> {
        let speed = |t: f64| -> Result<f64> { Ok(traj.state_at(t)?.1.norm()) };
        let mut times = vec![traj.first().t];
        let mut arc = vec![0.0];
        for w in traj.samples.windows(2) {
            let h = (w[1].t - w[0].t) / PANELS as f64;
            for j in 0..PANELS {
                let t0 = w[0].t + j as f64 * h;
                let t1 = if j + 1 == PANELS { w[1].t } else { t0 + h };
                let seg = (t1 - t0) / 6.0 * (speed(t0)? + 4.0 * speed(0.5 * (t0 + t1))? + speed(t1)?);
                arc.push(arc[arc.len() - 1] + seg);
                times.push(t1);
            }
        }
        Ok(ArcTable { traj, times, arc })
    }

    fn total(&self) -> f64 {
        self.arc[self.arc.len() - 1]
    }

    /// Point at arc length `ell`.
    fn point_at(&self, ell: f64) -> Result<Point> {
        let m = self.arc.len();
        let k = self.arc.partition_point(|&a| a <= ell).clamp(1, m - 1) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let (l0, l1) = (self.arc[k], self.arc[k + 1]);
        if l1 <= l0 {
            return Ok(self.traj.state_at(t0)?.0);
        }
        let v0 = self.traj.state_at(t0)?.1.norm();
        let mut t = t0 + (t1 - t0) * ((ell - l0) / (l1 - l0)).clamp(0.0, 1.0);
        for _ in 0..NEWTON_ITERS {
            let (_, v) = self.traj.state_at(t)?;
            let vm = self.traj.state_at(0.5 * (t0 + t))?.1.norm();
            let partial = l0 + (t - t0) / 6.0 * (v0 + 4.0 * vm + v.norm());
            let speed = v.norm();
            if speed == 0.0 {
                break;
            }
            t = (t - (partial - ell) / speed).clamp(t0, t1);
        }
        Ok(self.traj.state_at(t)?.0)
    }
}

/// Coordinate arc length `∫‖ẋ‖ dt`.
pub fn coordinate_length(traj: &Trajectory) -> Result<f64> {
    Ok(ArcTable::new(traj)?.total())
}

/// `m + 1` points equally spaced in coordinate arc length over `[0, length]`.
/// `length` defaults to the full arc and is clamped to it.
pub fn arc_length_resample(traj: &Trajectory, m: usize, length: Option<f64>) -> Result<Vec<Point>> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one resampling interval".into()));
    }
    let table = ArcTable::new(traj)?;
    let total = length.map_or(table.total(), |l| l.min(table.total()));
    (0..=m).map(|k| table.point_at(total * k as f64 / m as f64)).collect()
}

/// Discrete Fréchet distance between two polylines.
pub fn discrete_frechet(p: &[Point], q: &[Point]) -> f64 {
    if p.is_empty() || q.is_empty() {
        return f64::INFINITY;
    }
    let d = |i: usize, j: usize| (&p[i] - &q[j]).norm();
    let mut prev = vec![0.0f64; q.len()];
    let mut cur = vec![0.0f64; q.len()];
    for i in 0..p.len() {
        for j in 0..q.len() {
            let dij = d(i, j);
            cur[j] = match (i, j) {
                (0, 0) => dij,
                (0, _) => cur[j - 1].max(dij),
                (_, 0) => prev[0].max(dij),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(dij),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q.len() - 1]
}

#[derive(Clone, Copy, Debug)]
pub struct FrechetOptions {
    /// Resampling intervals per trace.
    pub points: usize,
    /// Compare over at most this coordinate arc length.
    pub max_length: Option<f64>,
    /// Traverse the second trace backwards.
    pub reverse_second: bool,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        FrechetOptions { points: 400, max_length: None, reverse_second: false }
    }
}

/// Discrete Fréchet distance of the two traces over their common arc
/// length, after equal arc-length resampling.
pub fn frechet_distance(a: &Trajectory, b: &Trajectory, opts: &FrechetOptions) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let la = coordinate_length(a)?;
    let lb = coordinate_length(b)?;
    let mut common: f64 = la.min(lb);
    if let Some(cap) = opts.max_length {
        common = common.min(cap);
    }
    let pa = arc_length_resample(a, opts.points, Some(common))?;
    let pb = if opts.reverse_second {
        // the tail of `b` is the start of its reversal
        let table = ArcTable::new(b)?;
        let total = table.total();
        (0..=opts.points)
            .map(|k| table.point_at(total - common * k as f64 / opts.points as f64))
            .collect::<Result<Vec<_>>>()?
    } else {
        arc_length_resample(b, opts.points, Some(common))?
    };
    Ok(discrete_frechet(&pa, &pb))
}

pub fn compare(a: &Trajectory, b: &Trajectory, metric: CompareMetric) -> Result<f64> {
    match metric {
        CompareMetric::Sup => sup_distance(a, b),
        CompareMetric::Frechet => frechet_distance(a, b, &FrechetOptions::default()),
    }
}

/// Positions as a polyline, without resampling.
pub fn polyline(traj: &Trajectory) -> Vec<Point> {
    traj.samples.iter().map(|p| p.x.clone()).collect::<Vec<DVector<f64>>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean;
    use crate::trajectory::{Sample, TrajectoryMeta};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn circle(r: f64, n: usize, speed: f64) -> Trajectory {
        let s = euclidean(2, 0);
        let samples = (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                let a = speed * t;
                Sample::new(&s, t, v(&[r * a.cos(), r * a.sin()]), v(&[-r * speed * a.sin(), r * speed * a.cos()]))
            })
            .collect();
        Trajectory::from_samples(samples, TrajectoryMeta::from_file("circle")).unwrap()
    }

    #[test]
    fn frechet_of_polylines() {
        let p = vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[2.0, 0.0])];
        let q = vec![v(&[0.0, 1.0]), v(&[2.0, 1.0])];
        assert_eq!(discrete_frechet(&p, &q), 2.0f64.sqrt());
        assert_eq!(discrete_frechet(&p, &p), 0.0);
    }

    #[test]
    fn arc_length_of_quarter_circle() {
        let c = circle(1.0, 40, std::f64::consts::FRAC_PI_2);
        let l = coordinate_length(&c).unwrap();
        assert!((l - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
        let pts = arc_length_resample(&c, 4, None).unwrap();
        let ang = pts[2][1].atan2(pts[2][0]);
        assert!((ang - std::f64::consts::FRAC_PI_4).abs() < 1e-6);
    }

    #[test]
    fn reparameterized_traces_coincide() {
        let a = circle(1.0, 30, 1.0);
        // same arc at a different speed, sampled differently
        let b = circle(1.0, 47, 1.0);
        let d = frechet_distance(&a, &b, &FrechetOptions::default()).unwrap();
        assert!(d < 1e-5, "{d}");
        let far = circle(1.1, 30, 1.0);
        assert!(frechet_distance(&a, &far, &FrechetOptions::default()).unwrap() > 0.09);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [CompareMetric::Sup, CompareMetric::Frechet] {
            assert_eq!(m.to_string().parse::<CompareMetric>().unwrap(), m);
        }
        assert!("hausdorff".parse::<CompareMetric>().is_err());
    }

    #[test]
    fn sup_distance_of_identical_is_zero() {
        let a = circle(1.0, 20, 1.0);
        assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
        let b = circle(1.0, 20, 1.1);
        assert!(sup_distance(&a, &b).unwrap() > 0.09);
    }
}
