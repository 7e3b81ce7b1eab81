//! Kropina structures `F = g/ω`: evaluation, indicatrix and nondegeneracy
//! diagnostics.
//!
//! A [`KropinaStructure`] wraps any [`KropinaModel`] (a supplier of `g_ij(x)`
//! and `ω_i(x)`) and derives first derivatives either analytically through
//! dual numbers or by central differences. Structures are immutable and
//! cheap to clone.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::{bilinear, bordered, orthogonal_complement};
use crate::real::{Dual, Dual64, Real};

pub type Point = DVector<f64>;
pub type Tangent = DVector<f64>;

/// Relative guard for `|ω(v)|` below which `F` is treated as undefined.
pub const EPS_OMEGA: f64 = 1e-12;
/// Relative threshold for the bordered-determinant nondegeneracy test.
pub const EPS_DET: f64 = 1e-10;

/// Pointwise values of `g` (row-major `n×n`) and `ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct Components<T> {
    pub metric: Vec<T>,
    pub oneform: Vec<T>,
}

pub trait KropinaModel: Send + Sync {
    fn dim(&self) -> usize;
    fn components(&self, x: &[f64]) -> Components<f64>;
    /// Components at a dual point; `None` when only plain evaluation exists.
    fn components_dual(&self, x: &[Dual64]) -> Option<Components<Dual64>>;
    fn has_analytic_derivatives(&self) -> bool {
        true
    }
}

/// Models whose formulas are written once over any [`Real`] scalar.
pub trait GenericModel: Send + Sync {
    fn dim(&self) -> usize;
    fn components_generic<T: Real>(&self, x: &[T]) -> Components<T>;
}

impl<M: GenericModel> KropinaModel for M {
    fn dim(&self) -> usize {
        GenericModel::dim(self)
    }
    fn components(&self, x: &[f64]) -> Components<f64> {
        self.components_generic(x)
    }
    fn components_dual(&self, x: &[Dual64]) -> Option<Components<Dual64>> {
        Some(self.components_generic(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// `g`, `ω` and their first partials at one point.
#[derive(Clone, Debug)]
pub struct Jet {
    pub metric: DMatrix<f64>,
    pub oneform: DVector<f64>,
    /// `dmetric[k] = ∂_k g`.
    pub dmetric: Vec<DMatrix<f64>>,
    /// `doneform[(k, j)] = ∂_k ω_j`.
    pub doneform: DMatrix<f64>,
}

#[derive(Clone)]
pub struct KropinaStructure {
    model: Arc<dyn KropinaModel>,
    label: String,
    mode: DerivativeMode,
}

impl fmt::Debug for KropinaStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KropinaStructure")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("mode", &self.mode)
            .finish()
    }
}

impl KropinaStructure {
    pub fn new(model: impl KropinaModel + 'static, label: impl Into<String>) -> Self {
        Self::from_arc(Arc::new(model), label)
    }

    pub fn from_arc(model: Arc<dyn KropinaModel>, label: impl Into<String>) -> Self {
        let mode = if model.has_analytic_derivatives() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::FiniteDifference
        };
        KropinaStructure { model, label: label.into(), mode }
    }

    /// Same structure, derivatives forced to central differences.
    pub fn with_finite_differences(&self) -> Self {
        KropinaStructure { mode: DerivativeMode::FiniteDifference, ..self.clone() }
    }

    pub fn with_label(&self, label: impl Into<String>) -> Self {
        KropinaStructure { label: label.into(), ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn model(&self) -> &Arc<dyn KropinaModel> {
        &self.model
    }

    pub fn components(&self, x: &[f64]) -> Components<f64> {
        self.model.components(x)
    }

    pub(crate) fn components_dual(&self, x: &[Dual64]) -> Option<Components<Dual64>> {
        match self.mode {
            DerivativeMode::Analytic => self.model.components_dual(x),
            DerivativeMode::FiniteDifference => None,
        }
    }

    pub fn metric(&self, x: &Point) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_row_slice(n, n, &self.components(x.as_slice()).metric)
    }

    pub fn oneform(&self, x: &Point) -> DVector<f64> {
        DVector::from_vec(self.components(x.as_slice()).oneform)
    }

    pub fn jet(&self, x: &Point) -> Jet {
        let n = self.dim();
        assert_eq!(x.len(), n, "point dimension does not match structure");
        if self.mode == DerivativeMode::Analytic {
            if let Some(jet) = self.analytic_jet(x) {
                return jet;
            }
        }
        self.fd_jet(x)
    }

    fn analytic_jet(&self, x: &Point) -> Option<Jet> {
        let n = self.dim();
        let mut buf: Vec<Dual64> = x.iter().map(|&v| Dual::lift(v)).collect();
        let mut metric = DMatrix::zeros(n, n);
        let mut oneform = DVector::zeros(n);
        let mut dmetric = Vec::with_capacity(n);
        let mut doneform = DMatrix::zeros(n, n);
        for k in 0..n {
            buf[k].eps = 1.0;
            let c = self.model.components_dual(&buf)?;
            buf[k].eps = 0.0;
            if k == 0 {
                metric = DMatrix::from_fn(n, n, |i, j| c.metric[i * n + j].re);
                oneform = DVector::from_fn(n, |i, _| c.oneform[i].re);
            }
            dmetric.push(DMatrix::from_fn(n, n, |i, j| c.metric[i * n + j].eps));
            for j in 0..n {
                doneform[(k, j)] = c.oneform[j].eps;
            }
        }
        Some(Jet { metric, oneform, dmetric, doneform })
    }

    fn fd_jet(&self, x: &Point) -> Jet {
        let n = self.dim();
        let base = self.components(x.as_slice());
        let metric = DMatrix::from_row_slice(n, n, &base.metric);
        let oneform = DVector::from_vec(base.oneform);
        let mut dmetric = Vec::with_capacity(n);
        let mut doneform = DMatrix::zeros(n, n);
        let cbrt_eps = f64::EPSILON.cbrt();
        let mut xp = x.as_slice().to_vec();
        for k in 0..n {
            let h = cbrt_eps * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let plus = self.components(&xp);
            xp[k] = x[k] - h;
            let minus = self.components(&xp);
            xp[k] = x[k];
            let inv = 1.0 / (2.0 * h);
            dmetric.push(DMatrix::from_fn(n, n, |i, j| (plus.metric[i * n + j] - minus.metric[i * n + j]) * inv));
            for j in 0..n {
                doneform[(k, j)] = (plus.oneform[j] - minus.oneform[j]) * inv;
            }
        }
        Jet { metric, oneform, dmetric, doneform }
    }
}

impl Jet {
    /// Exterior derivative `dω_ij = ∂_i ω_j − ∂_j ω_i`.
    pub fn d_oneform(&self) -> DMatrix<f64> {
        &self.doneform - self.doneform.transpose()
    }
}

fn kernel_guard(omega: &DVector<f64>, v: &DVector<f64>) -> f64 {
    EPS_OMEGA * omega.norm() * v.norm()
}

/// Checks `|ω(v)|` against the kernel guard and returns `ω(v)`.
pub fn checked_omega(omega: &DVector<f64>, v: &Tangent) -> Result<f64> {
    let w = omega.dot(v);
    if w.abs() <= kernel_guard(omega, v) {
        return Err(Error::KernelDirection { omega_v: w });
    }
    Ok(w)
}

/// `F(x, v) = g_x(v, v) / ω_x(v)`.
pub fn eval_f(s: &KropinaStructure, x: &Point, v: &Tangent) -> Result<f64> {
    let c = s.components(x.as_slice());
    let n = s.dim();
    check_dims(n, x, v)?;
    let g = DMatrix::from_row_slice(n, n, &c.metric);
    let omega = DVector::from_vec(c.oneform);
    let w = checked_omega(&omega, v)?;
    Ok(bilinear(&g, v, v) / w)
}

fn check_dims(n: usize, x: &Point, v: &Tangent) -> Result<()> {
    if x.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "structure has dimension {n}, point {} and vector {}",
            x.len(),
            v.len()
        )));
    }
    Ok(())
}

/// The indicatrix at a point: the `g`-sphere through the origin with centre
/// `W = ½ g⁻¹ ω`.
#[derive(Clone, Debug)]
pub struct Indicatrix {
    pub base: Point,
    pub center: Tangent,
    pub radius_sq: f64,
}

fn invert_metric(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = g.norm().max(f64::MIN_POSITIVE);
    let lu = g.clone().lu();
    let det = lu.determinant();
    if det.abs() <= EPS_DET * scale.powi(g.nrows() as i32) {
        return Err(Error::DegenerateMetric);
    }
    lu.try_inverse().ok_or(Error::DegenerateMetric)
}

pub fn indicatrix_of(s: &KropinaStructure, x: &Point) -> Result<Indicatrix> {
    let g = s.metric(x);
    let omega = s.oneform(x);
    let ginv = invert_metric(&g)?;
    let center = (&ginv * &omega) * 0.5;
    let radius_sq = bilinear(&g, &center, &center);
    Ok(Indicatrix { base: x.clone(), center, radius_sq })
}

/// Default lower bound for `ω(v)` on sampled indicatrix vectors, as a
/// multiple of `g(W, W)`.
pub const DEFAULT_CAP: f64 = 0.05;

/// Quasi-uniform samples of the indicatrix at `x`, keeping `ω(v) ≥ cap·g(W,W)`.
pub fn sample_indicatrix(s: &KropinaStructure, x: &Point, m: usize) -> Result<Vec<Tangent>> {
    sample_indicatrix_capped(s, x, m, DEFAULT_CAP)
}

pub fn sample_indicatrix_capped(s: &KropinaStructure, x: &Point, m: usize, cap: f64) -> Result<Vec<Tangent>> {
    let frame = IndicatrixFrame::at(s, x)?;
    let n = s.dim();
    if m == 0 {
        return Ok(Vec::new());
    }
    // ω(v) = 2|W|²(1 + cos θ) with θ measured from the pole v = 2W
    let z_min = (cap / 2.0 - 1.0).clamp(-1.0, 1.0);
    let dirs: Vec<DVector<f64>> = match n {
        1 => vec![DVector::from_element(1, 1.0); m],
        2 => {
            let theta_max = z_min.acos();
            (0..m)
                .map(|k| {
                    let th = if m == 1 { 0.0 } else { -theta_max + 2.0 * theta_max * (k as f64 + 0.5) / m as f64 };
                    DVector::from_vec(vec![th.sin(), th.cos()])
                })
                .collect()
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - (k as f64 + 0.5) / m as f64 * (1.0 - z_min);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * k as f64;
                    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x6b72_6f70);
            let mut out = Vec::with_capacity(m);
            while out.len() < m {
                let mut u = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                u.normalize_mut();
                if u[n - 1] >= z_min {
                    out.push(u);
                }
            }
            out
        }
    };
    Ok(dirs.iter().map(|u| frame.vector(u)).collect())
}

/// Parameterization of a compact indicatrix by unit vectors: the last axis of
/// the unit-vector coordinates is the pole `v = 2W`, the first `n−1` axes span
/// its complement.
#[derive(Clone, Debug)]
pub struct IndicatrixFrame {
    pub center: Tangent,
    pub radius: f64,
    /// Maps unit coordinate vectors to `v − W`.
    pub map: DMatrix<f64>,
}

impl IndicatrixFrame {
    pub fn at(s: &KropinaStructure, x: &Point) -> Result<Self> {
        let ind = indicatrix_of(s, x)?;
        let g = s.metric(x);
        let chol = nalgebra::Cholesky::new(g.clone()).ok_or(Error::NonCompactIndicatrix)?;
        let l = chol.l();
        let radius = ind.radius_sq.sqrt();
        let n = s.dim();
        // pole direction in g-orthonormal coordinates: Lᵀ W / |W|
        let pole = l.transpose() * &ind.center / radius;
        let lt_inv = l.transpose().try_inverse().ok_or(Error::DegenerateMetric)?;
        let mut basis = DMatrix::zeros(n, n);
        if n > 1 {
            let comp = orthogonal_complement(&pole);
            basis.columns_mut(0, n - 1).copy_from(&comp);
        }
        basis.set_column(n - 1, &pole);
        let map = lt_inv * basis * radius;
        Ok(IndicatrixFrame { center: ind.center, radius, map })
    }

    /// Indicatrix vector for unit-vector coordinates `u`.
    pub fn vector(&self, u: &DVector<f64>) -> Tangent {
        &self.center + &self.map * u
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NondegeneracyReport {
    pub ok: bool,
    pub bordered_det: f64,
}

/// Nondegeneracy of `g` on `ker ω` via the bordered matrix `[[0, ω],[ωᵀ, g]]`.
pub fn check_nondegenerate_on_kernel(s: &KropinaStructure, x: &Point) -> NondegeneracyReport {
    let b = bordered(&s.metric(x), &s.oneform(x));
    let det = b.determinant();
    let scale = b.norm();
    let ok = scale > 0.0 && det.abs() > EPS_DET * scale.powi(b.nrows() as i32);
    NondegeneracyReport { ok, bordered_det: det }
}

// ---------------------------------------------------------------------------
// Derived structures

/// A 1-form field, either by components or as the differential of a potential.
#[derive(Clone, Debug, PartialEq)]
pub enum CovectorField {
    Components(Vec<Expr>),
    Exact(Expr),
}

impl CovectorField {
    pub fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        match self {
            CovectorField::Components(c) => c.iter().map(|e| e.eval(x)).collect(),
            CovectorField::Exact(f) => f.gradient(x),
        }
    }

    /// `dβ_ij = ∂_i β_j − ∂_j β_i`, largest magnitude.
    pub fn closedness_defect(&self, x: &[f64]) -> f64 {
        match self {
            CovectorField::Exact(_) => {
                // exact by construction; still measured numerically
                self.measured_defect(x)
            }
            CovectorField::Components(_) => self.measured_defect(x),
        }
    }

    fn measured_defect(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut buf: Vec<Dual64> = x.iter().map(|&v| Dual::lift(v)).collect();
        let mut jac = vec![0.0; n * n];
        for k in 0..n {
            buf[k].eps = 1.0;
            let b = self.eval(&buf);
            buf[k].eps = 0.0;
            for j in 0..n {
                jac[k * n + j] = b[j].eps;
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((jac[i * n + j] - jac[j * n + i]).abs());
            }
        }
        worst
    }
}

/// `(c·g + sym(β⊗ω), σ·ω)`: covers `modify_metric`, projective shifts and the
/// backward structure.
struct ShiftedModel {
    base: KropinaStructure,
    scale: f64,
    beta: Option<CovectorField>,
    omega_sign: f64,
}

impl ShiftedModel {
    fn apply<T: Real>(&self, mut c: Components<T>, x: &[T]) -> Components<T> {
        let n = c.oneform.len();
        if self.scale != 1.0 {
            for v in c.metric.iter_mut() {
                *v = v.scale(self.scale);
            }
        }
        if let Some(beta) = &self.beta {
            let b = beta.eval(x);
            for i in 0..n {
                for j in 0..n {
                    let add = (b[i] * c.oneform[j] + b[j] * c.oneform[i]).scale(0.5);
                    c.metric[i * n + j] = c.metric[i * n + j] + add;
                }
            }
        }
        if self.omega_sign != 1.0 {
            for w in c.oneform.iter_mut() {
                *w = w.scale(self.omega_sign);
            }
        }
        c
    }
}

impl KropinaModel for ShiftedModel {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn components(&self, x: &[f64]) -> Components<f64> {
        self.apply(self.base.components(x), x)
    }
    fn components_dual(&self, x: &[Dual64]) -> Option<Components<Dual64>> {
        self.base.components_dual(x).map(|c| self.apply(c, x))
    }
    fn has_analytic_derivatives(&self) -> bool {
        self.base.derivative_mode() == DerivativeMode::Analytic
    }
}

/// `g' = g + sym(ω ⊗ df)`; `F` gains the exact form `df`.
pub fn modify_metric(s: &KropinaStructure, f: &Expr) -> KropinaStructure {
    let label = format!("{}+df", s.label());
    KropinaStructure::new(
        ShiftedModel { base: s.clone(), scale: 1.0, beta: Some(CovectorField::Exact(f.clone())), omega_sign: 1.0 },
        label,
    )
    .with_mode_of(s)
}

/// `ĝ = c·g + sym(β⊗ω)` so that `F̂ = cF + β`. `β` is not checked here.
pub(crate) fn shifted(s: &KropinaStructure, c: f64, beta: Option<CovectorField>, label: String) -> KropinaStructure {
    KropinaStructure::new(ShiftedModel { base: s.clone(), scale: c, beta, omega_sign: 1.0 }, label).with_mode_of(s)
}

/// The backward structure `(g, −ω)`.
pub fn backward(s: &KropinaStructure) -> KropinaStructure {
    let label = format!("{}:backward", s.label());
    KropinaStructure::new(ShiftedModel { base: s.clone(), scale: 1.0, beta: None, omega_sign: -1.0 }, label)
        .with_mode_of(s)
}

impl KropinaStructure {
    fn with_mode_of(mut self, other: &KropinaStructure) -> Self {
        if other.mode == DerivativeMode::FiniteDifference {
            self.mode = DerivativeMode::FiniteDifference;
        }
        self
    }
}

/// Chooses a linear potential `f` with `ker df = H` at `center` such that
/// `g + sym(ω⊗df)` is block diagonal there, with `g'(X,X)` equal to the mean
/// eigenvalue of `g|H` on the `g`-orthogonal complement `X` of `H`.
pub fn auto_modification(s: &KropinaStructure, center: &Point) -> Result<(KropinaStructure, Expr)> {
    let n = s.dim();
    let g = s.metric(center);
    let omega = s.oneform(center);
    if omega.norm() == 0.0 {
        return Err(Error::InvalidInput("ω vanishes at the centre".into()));
    }
    let report = check_nondegenerate_on_kernel(s, center);
    if !report.ok {
        return Err(Error::DegenerateOnKernel { det: report.bordered_det });
    }
    let h = orthogonal_complement(&omega);
    let gh = h.transpose() * &g * &h;
    let eig = gh.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NonCompactIndicatrix);
    }
    let mu = eig.eigenvalues.mean();
    // X spans the null space of v ↦ g(v, ·)|_H
    let rows = h.transpose() * &g;
    let x_dir = if n == 1 {
        DVector::from_element(1, 1.0)
    } else {
        let svd = rows.clone().svd(false, true);
        let vt = svd.v_t.ok_or(Error::DegenerateMetric)?;
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &sv)| if sv < acc.1 { (i, sv) } else { acc });
        let mut candidate = vt.row(imin).transpose();
        if vt.nrows() < n {
            // the thin SVD omits the null vector; recover it as the complement of the row space
            let q = rows.transpose().qr().q();
            let mut p = DMatrix::identity(n, n) - &q * q.transpose();
            p.column_iter_mut().for_each(|_| {});
            let col = (0..n).max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm())).unwrap_or(0);
            candidate = p.column(col).into_owned();
        }
        candidate.normalize()
    };
    let wx = omega.dot(&x_dir);
    let c = (mu - bilinear(&g, &x_dir, &x_dir)) / (wx * wx);
    let mut f = Expr::constant(0.0);
    for i in 0..n {
        if omega[i] != 0.0 {
            let term = Expr::constant(c * omega[i]) * (Expr::var(i) - Expr::constant(center[i]));
            f = if matches!(f, Expr::Const(z) if z == 0.0) { term } else { f + term };
        }
    }
    Ok((modify_metric(s, &f), f))
}

/// Closure-backed model; derivatives come from the optional suppliers or from
/// central differences.
pub struct ClosureModel {
    pub dim: usize,
    pub metric: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
    pub oneform: Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>,
    pub dmetric: Option<Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>>,
    pub doneform: Option<Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>>,
}

impl KropinaModel for ClosureModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self, x: &[f64]) -> Components<f64> {
        let g = (self.metric)(x);
        let w = (self.oneform)(x);
        let n = self.dim;
        Components { metric: (0..n * n).map(|k| g[(k / n, k % n)]).collect(), oneform: w.iter().copied().collect() }
    }
    fn components_dual(&self, x: &[Dual64]) -> Option<Components<Dual64>> {
        let (dg, dw) = (self.dmetric.as_ref()?, self.doneform.as_ref()?);
        let n = self.dim;
        let re: Vec<f64> = x.iter().map(|d| d.re).collect();
        let base = self.components(&re);
        let dgs = dg(&re);
        let dws = dw(&re);
        let metric = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let eps: f64 = (0..n).map(|m| x[m].eps * dgs[m][(i, j)]).sum();
                Dual::new(base.metric[k], eps)
            })
            .collect();
        let oneform = (0..n)
            .map(|j| {
                let eps: f64 = (0..n).map(|m| x[m].eps * dws[(m, j)]).sum();
                Dual::new(base.oneform[j], eps)
            })
            .collect();
        Some(Components { metric, oneform })
    }
    fn has_analytic_derivatives(&self) -> bool {
        self.dmetric.is_some() && self.doneform.is_some()
    }
}

/// Model given by expressions for `g_ij` (full row-major matrix) and `ω_i`.
#[derive(Clone, Debug)]
pub struct ExprModel {
    pub metric: Vec<Expr>,
    pub oneform: Vec<Expr>,
}

impl ExprModel {
    pub fn constant(g: &DMatrix<f64>, omega: &DVector<f64>) -> Self {
        ExprModel {
            metric: g.transpose().iter().map(|&v| Expr::constant(v)).collect(),
            oneform: omega.iter().map(|&v| Expr::constant(v)).collect(),
        }
    }
}

impl GenericModel for ExprModel {
    fn dim(&self) -> usize {
        self.oneform.len()
    }
    fn components_generic<T: Real>(&self, x: &[T]) -> Components<T> {
        Components {
            metric: self.metric.iter().map(|e| e.eval(x)).collect(),
            oneform: self.oneform.iter().map(|e| e.eval(x)).collect(),
        }
    }
}

/// `g = δ`, `ω = dx^{k}` on `ℝⁿ`.
pub fn euclidean(n: usize, k: usize) -> KropinaStructure {
    let g = DMatrix::identity(n, n);
    let mut w = DVector::zeros(n);
    w[k] = 1.0;
    KropinaStructure::new(ExprModel::constant(&g, &w), format!("euclidean:{n}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr::heisenberg_kropina;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn eval_f_examples() {
        let e = euclidean(3, 0);
        assert_eq!(eval_f(&e, &v(&[0.0; 3]), &v(&[1.0, 0.0, 0.0])).unwrap(), 1.0);
        let h = heisenberg_kropina(1);
        let o = v(&[0.0; 3]);
        assert!((eval_f(&h, &o, &v(&[1.0, 0.0, 1.0])).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(eval_f(&h, &o, &v(&[0.0, 0.0, 1.0])).unwrap(), 0.0);
        assert!(matches!(eval_f(&h, &o, &v(&[1.0, 0.0, 0.0])), Err(Error::KernelDirection { .. })));
        assert!(matches!(eval_f(&h, &o, &v(&[0.0, 0.0, 0.0])), Err(Error::KernelDirection { .. })));
    }

    #[test]
    fn indicatrix_examples() {
        let e = euclidean(3, 0);
        let o = v(&[0.0; 3]);
        let ind = indicatrix_of(&e, &o).unwrap();
        assert!((&ind.center - v(&[0.5, 0.0, 0.0])).norm() < 1e-15);
        assert!((ind.radius_sq - 0.25).abs() < 1e-15);
        // doubling ω halves F, so the indicatrix grows: W = ½g⁻¹(2ω)
        let doubled = KropinaStructure::new(ExprModel::constant(&e.metric(&o), &(e.oneform(&o) * 2.0)), "2w");
        let ind2 = indicatrix_of(&doubled, &o).unwrap();
        assert!((ind2.center - v(&[1.0, 0.0, 0.0])).norm() < 1e-15);
        let w2 = &ind.center * 2.0;
        assert!((eval_f(&e, &o, &w2).unwrap() - 1.0).abs() < 1e-15);
        let h = heisenberg_kropina(1);
        assert_eq!(indicatrix_of(&h, &o).unwrap_err(), Error::DegenerateMetric);
    }

    #[test]
    fn sampled_indicatrix_vectors_have_unit_f() {
        let e = euclidean(3, 0);
        let o = v(&[0.0; 3]);
        let samples = sample_indicatrix(&e, &o, 4).unwrap();
        assert_eq!(samples.len(), 4);
        for s in &samples {
            assert!((eval_f(&e, &o, s).unwrap() - 1.0).abs() < 1e-12);
            assert!(((s - v(&[0.5, 0.0, 0.0])).norm() - 0.5).abs() < 1e-14);
        }
        assert!(sample_indicatrix(&e, &o, 0).unwrap().is_empty());
        let h = modify_metric(&heisenberg_kropina(1), &crate::expr::Expr::var(2));
        for s in sample_indicatrix(&h, &o, 50).unwrap() {
            assert!((eval_f(&h, &o, &s).unwrap() - 1.0).abs() <= 1e-10);
        }
        for n in [1, 2, 4, 5] {
            let e = euclidean(n, 0);
            let o = DVector::zeros(n);
            for s in sample_indicatrix(&e, &o, 17).unwrap() {
                assert!((eval_f(&e, &o, &s).unwrap() - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn indefinite_metric_has_no_compact_indicatrix() {
        let g = DMatrix::from_diagonal(&v(&[1.0, -1.0]));
        let s = KropinaStructure::new(ExprModel::constant(&g, &v(&[1.0, 0.0])), "indef");
        let err = sample_indicatrix(&s, &v(&[0.0, 0.0]), 3).unwrap_err();
        assert_eq!(err, Error::NonCompactIndicatrix);
    }

    #[test]
    fn nondegeneracy_examples() {
        let e = euclidean(3, 0);
        let r = check_nondegenerate_on_kernel(&e, &v(&[0.0; 3]));
        assert!(r.ok);
        assert!((r.bordered_det + 1.0).abs() < 1e-14);
        let h = heisenberg_kropina(1);
        let r = check_nondegenerate_on_kernel(&h, &v(&[0.0; 3]));
        assert!(r.ok);
        // [[0,0,0,1],[0,2,0,0],[0,0,2,0],[1,0,0,0]]
        assert!((r.bordered_det + 4.0).abs() < 1e-13);
        let zero = KropinaStructure::new(ExprModel::constant(&DMatrix::zeros(3, 3), &v(&[1.0, 0.0, 0.0])), "g=0");
        assert!(!check_nondegenerate_on_kernel(&zero, &v(&[0.0; 3])).ok);
    }

    #[test]
    fn modify_metric_examples() {
        let h = heisenberg_kropina(1);
        let o = v(&[0.0; 3]);
        let m = modify_metric(&h, &Expr::var(2));
        let g = m.metric(&o);
        assert!((g[(2, 2)] - 1.0).abs() < 1e-15);
        assert!(g.determinant().abs() > 1e-3);
        let same = modify_metric(&h, &Expr::constant(0.0));
        let x = v(&[0.3, -0.2, 0.5]);
        assert_eq!(same.metric(&x), h.metric(&x));
        assert_eq!(same.oneform(&x), h.oneform(&x));
    }

    #[test]
    fn auto_modification_is_positive_definite_at_center() {
        let h = heisenberg_kropina(1);
        for c in [v(&[0.0; 3]), v(&[0.3, -0.4, 1.0])] {
            let (m, _) = auto_modification(&h, &c).unwrap();
            let eig = m.metric(&c).symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l > 0.0), "{:?}", eig.eigenvalues);
        }
    }

    #[test]
    fn jet_modes_agree() {
        let h = modify_metric(&heisenberg_kropina(1), &(Expr::var(0) * Expr::var(2)));
        let x = v(&[0.3, -0.7, 0.2]);
        let a = h.jet(&x);
        let f = h.with_finite_differences().jet(&x);
        for k in 0..3 {
            assert!((&a.dmetric[k] - &f.dmetric[k]).norm() < 1e-8);
        }
        assert!((&a.doneform - &f.doneform).norm() < 1e-8);
    }
}
