//! Closed-ω affine connection, projective shifts `F ↦ cF + β`, the
//! exceptional set `𝒩 ⊂ H` and the blow-up of the geodesic acceleration near
//! `ker ω`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::compare::{frechet_distance, FrechetOptions};
use crate::euler_lagrange::{assemble_el_system, integrate_geodesic, levi_civita_from_jet, min_norm_acceleration, Christoffel, TraceOptions};
use crate::geometry::{shifted, CovectorField, KropinaStructure, Point, Tangent, EPS_OMEGA};
use crate::linalg::{bilinear, fit_slope, orthogonal_complement};
use crate::trajectory::Trajectory;

/// Tolerance on `|∂_iω_j − ∂_jω_i|` below which a 1-form counts as closed.
pub const CLOSED_TOL: f64 = 1e-8;
/// Relative tolerance for membership in the exceptional set.
pub const EXCEPTIONAL_TOL: f64 = 1e-10;

/// `Γ_ij^k = Γ^g_ij^k + (∇^g_i ω_j) ω^k / |ω|²_g`, defined when `dω = 0`.
pub fn closed_form_connection(s: &KropinaStructure, x: &Point) -> Result<Christoffel> {
    let jet = s.jet(x);
    let defect = jet.d_oneform().amax();
    if defect > CLOSED_TOL {
        return Err(Error::NotClosed { defect });
    }
    let n = s.dim();
    let lc = levi_civita_from_jet(&jet)?;
    let ginv = crate::euler_lagrange::invert(&jet.metric)?;
    let raised = &ginv * &jet.oneform;
    let norm_sq = jet.oneform.dot(&raised);
    if norm_sq.abs() <= EPS_OMEGA * ginv.norm() * jet.oneform.norm_squared() {
        return Err(Error::NullOmega);
    }
    let mut out = lc.clone();
    for i in 0..n {
        for j in 0..n {
            let cov: f64 = jet.doneform[(i, j)] - (0..n).map(|k| lc.get(i, j, k) * jet.oneform[k]).sum::<f64>();
            for k in 0..n {
                out.set(i, j, k, lc.get(i, j, k) + cov * raised[k] / norm_sq);
            }
        }
    }
    Ok(out)
}

/// Largest component of `ẍ + Γ(ẋ, ẋ)` orthogonal to `ẋ`, over the samples.
/// Zero for a reparameterized geodesic of the connection.
pub fn pregeodesic_residual(traj: &Trajectory, symbols_at: impl Fn(&Point) -> Result<Christoffel>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in &traj.samples {
        let acc = traj.acceleration_at(p.t)?;
        let gamma = symbols_at(&p.x)?;
        let r = acc + gamma.contract(&p.xi);
        let vv = p.xi.norm_squared();
        let perp = if vv > 0.0 { &r - &p.xi * (r.dot(&p.xi) / vv) } else { r };
        worst = worst.max(perp.norm());
    }
    Ok(worst)
}

/// The structure with `F̂ = cF + β`. `β` must be closed at `probe`.
pub fn projective_shift(s: &KropinaStructure, c: f64, beta: Option<CovectorField>, probe: &Point) -> Result<KropinaStructure> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidInput(format!("scale must be finite and nonzero, got {c}")));
    }
    if let Some(b) = &beta {
        let defect = b.closedness_defect(probe.as_slice());
        if defect > CLOSED_TOL {
            return Err(Error::NotClosed { defect });
        }
    }
    let label = match &beta {
        None => format!("{}*{c}", s.label()),
        Some(_) => format!("{}*{c}+beta", s.label()),
    };
    Ok(shifted(s, c, beta, label))
}

/// Whether `ξ₀ ∈ H = ker ω` lies in `𝒩`: `g(ξ₀,ξ₀) = 0` or
/// `(ξ₀⌟dω)|_H = 0`.
pub fn in_exceptional_set(s: &KropinaStructure, x: &Point, xi0: &Tangent) -> Result<bool> {
    let jet = s.jet(x);
    let omega = &jet.oneform;
    let w = omega.dot(xi0);
    let vnorm = xi0.norm();
    if w.abs() > EPS_OMEGA * omega.norm().max(1.0) * vnorm {
        return Err(Error::NotInKernel { omega_xi: w });
    }
    if vnorm == 0.0 {
        return Ok(true);
    }
    let q = bilinear(&jet.metric, xi0, xi0);
    if q.abs() <= EXCEPTIONAL_TOL * jet.metric.norm().max(1.0) * vnorm * vnorm {
        return Ok(true);
    }
    let h = orthogonal_complement(omega);
    // (ξ⌟dω)_j = ξ^i dω_ij
    let contracted = jet.d_oneform().transpose() * xi0;
    let restricted = h.transpose() * contracted;
    let scale = jet.doneform.norm().max(1.0) * vnorm;
    Ok(restricted.norm() <= EXCEPTIONAL_TOL * scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupProbe {
    pub s: f64,
    pub omega_xi: f64,
    pub eta_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    /// Sorted by `s` descending.
    pub probes: Vec<BlowupProbe>,
    /// Slope of `log‖η*‖` against `log|ω(ξ_s)|`.
    pub fitted_exponent: f64,
    pub xi0_in_exceptional_set: bool,
}

/// `s` values log-spaced from `hi` down to `lo`.
pub fn log_spaced(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

/// Minimal-norm acceleration along `ξ_s = ξ₀ + s·v` and the fitted power
/// law in `ω(ξ_s)`.
pub fn blowup_probe(s: &KropinaStructure, x: &Point, xi0: &Tangent, v: &Tangent, s_values: &[f64]) -> Result<BlowupReport> {
    let wv = s.oneform(x).dot(v);
    if (wv - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("probe direction needs ω(v) = 1, got {wv}")));
    }
    if in_exceptional_set(s, x, xi0)? {
        return Err(Error::InExceptionalSet);
    }
    if s_values.len() < 2 {
        return Err(Error::InvalidInput("need at least two s values".into()));
    }
    let mut svals: Vec<f64> = s_values.to_vec();
    svals.sort_by(|a, b| b.total_cmp(a));
    let probes = svals
        .iter()
        .map(|&sv| {
            let xi: DVector<f64> = xi0 + v * sv;
            let sys = assemble_el_system(s, x, &xi)?;
            let eta = min_norm_acceleration(&sys)?;
            Ok(BlowupProbe { s: sv, omega_xi: s.oneform(x).dot(&xi), eta_norm: eta.norm() })
        })
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = probes.iter().map(|p| p.omega_xi.abs().ln()).collect();
    let ly: Vec<f64> = probes.iter().map(|p| p.eta_norm.ln()).collect();
    Ok(BlowupReport { fitted_exponent: fit_slope(&lx, &ly), probes, xi0_in_exceptional_set: false })
}

/// Fréchet distance between the traces of `s` and `shifted` from a common
/// seed. For negative scales the shifted trace starts from `−ξ` and is
/// compared with the `s`-geodesic run back from its endpoint.
pub fn shift_trace_distance(
    s: &KropinaStructure,
    shifted: &KropinaStructure,
    x: &Point,
    xi: &Tangent,
    reversed: bool,
    opts: &TraceOptions,
) -> Result<f64> {
    if !reversed {
        let a = integrate_geodesic(s, x, xi, opts)?;
        let b = integrate_geodesic(shifted, x, xi, opts)?;
        return frechet_distance(&a, &b, &FrechetOptions::default());
    }
    let b = integrate_geodesic(shifted, x, &(-xi), opts)?;
    let end = b.last();
    let a = integrate_geodesic(s, &end.x, &(-&end.xi), opts)?;
    frechet_distance(&b, &a, &FrechetOptions { reverse_second: true, ..Default::default() })
}
