//! Kropina structures from the Heisenberg CR model and its conformal
//! rescalings `θ = e^Υ θ₀`.
//!
//! Coordinates on `ℝ^{2n+1}` are ordered `(x¹..xⁿ, y¹..yⁿ, t)` with
//! `z^α = x^α + i y^α`. The frame `Z_α = ∂/∂z^α + i z̄^α ∂/∂t` splits as
//! `Z_α = X_α + i Y_α` with `X_α = ½∂_{x^α} + y^α∂_t` and
//! `Y_α = −½∂_{y^α} + x^α∂_t`. The Levi form is `2δ`, so `h^{αβ̄} = δ/2`.
//! Frame derivatives of `Υ` are built symbolically and evaluated over any
//! [`Real`] scalar.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Expr, Func};
use crate::geometry::{Components, GenericModel, KropinaStructure, Point};
use crate::real::Real;

/// Conformal-factor data on the Heisenberg model of CR dimension `n`.
#[derive(Clone, Debug)]
pub struct CRModelSpec {
    pub n: usize,
    pub upsilon: Expr,
    pub label: String,
}

/// Coordinate names `x, y, t` for `n = 1`, otherwise `x1..xn, y1..yn, t`.
pub fn coordinate_names(n: usize) -> Vec<String> {
    if n == 1 {
        return vec!["x".into(), "y".into(), "t".into()];
    }
    let mut v: Vec<String> = (1..=n).map(|a| format!("x{a}")).collect();
    v.extend((1..=n).map(|a| format!("y{a}")));
    v.push("t".into());
    v
}

impl CRModelSpec {
    pub fn new(n: usize, upsilon: Expr, label: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("CR dimension must be at least 1".into()));
        }
        if let Some(m) = upsilon.max_var() {
            if m > 2 * n {
                return Err(Error::DimensionMismatch(format!(
                    "Υ references coordinate {} but the model has {}",
                    m + 1,
                    2 * n + 1
                )));
            }
        }
        Ok(CRModelSpec { n, upsilon, label: label.into() })
    }

    /// The flat model, `Υ = 0`.
    pub fn flat(n: usize) -> Self {
        CRModelSpec { n, upsilon: Expr::constant(0.0), label: format!("heisenberg:{n}") }
    }

    /// `Υ = −2 log ρ = −½ log(|z|⁴ + t²)`.
    pub fn burns_shnider(n: usize) -> Self {
        let z2 = z_norm_sq(n);
        let t = Expr::var(2 * n);
        let arg = z2.powi(2) + t.powi(2);
        let upsilon = Expr::constant(-0.5) * Expr::call(Func::Log, arg);
        CRModelSpec { n, upsilon, label: format!("burns-shnider:{n}") }
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    fn x(&self, a: usize) -> usize {
        a
    }
    fn y(&self, a: usize) -> usize {
        self.n + a
    }
    fn t(&self) -> usize {
        2 * self.n
    }

    /// `X_α f = ½∂_{x^α} f + y^α ∂_t f`.
    fn xa(&self, a: usize, f: &Expr) -> Expr {
        Expr::add_s(
            Expr::mul_s(Expr::constant(0.5), f.diff(self.x(a))),
            Expr::mul_s(Expr::var(self.y(a)), f.diff(self.t())),
        )
    }

    /// `Y_α f = −½∂_{y^α} f + x^α ∂_t f`.
    fn ya(&self, a: usize, f: &Expr) -> Expr {
        Expr::add_s(
            Expr::mul_s(Expr::constant(-0.5), f.diff(self.y(a))),
            Expr::mul_s(Expr::var(self.x(a)), f.diff(self.t())),
        )
    }

    fn z(&self, a: usize, f: &Cx) -> Cx {
        Cx {
            re: Expr::sub_s(self.xa(a, &f.re), self.ya(a, &f.im)),
            im: Expr::add_s(self.xa(a, &f.im), self.ya(a, &f.re)),
        }
    }

    fn zbar(&self, a: usize, f: &Cx) -> Cx {
        Cx {
            re: Expr::add_s(self.xa(a, &f.re), self.ya(a, &f.im)),
            im: Expr::sub_s(self.xa(a, &f.im), self.ya(a, &f.re)),
        }
    }

    /// `Δ_b Υ = −Σ_α (X_α² + Y_α²) Υ`.
    fn sublaplacian(&self) -> Expr {
        let mut acc = Expr::constant(0.0);
        for a in 0..self.n {
            let xx = self.xa(a, &self.xa(a, &self.upsilon));
            let yy = self.ya(a, &self.ya(a, &self.upsilon));
            acc = Expr::sub_s(acc, Expr::add_s(xx, yy));
        }
        acc
    }

    /// Expression for the Tanaka–Webster scalar curvature of `e^Υ θ₀`.
    pub fn scalar_curvature_expr(&self) -> Expr {
        let n = self.n as f64;
        let mut grad_sq = Expr::constant(0.0);
        for a in 0..self.n {
            let xu = self.xa(a, &self.upsilon);
            let yu = self.ya(a, &self.upsilon);
            grad_sq = Expr::add_s(grad_sq, Expr::add_s(xu.powi(2), yu.powi(2)));
        }
        // Υ_α Υ^α = ½ Σ |Z_α Υ|²
        let bracket = Expr::sub_s(
            Expr::mul_s(Expr::constant(n + 1.0), self.sublaplacian()),
            Expr::mul_s(Expr::constant(0.5 * n * (n + 1.0)), grad_sq),
        );
        if bracket == Expr::constant(0.0) {
            return bracket;
        }
        Expr::mul_s(Expr::call(Func::Exp, Expr::neg_s(self.upsilon.clone())), bracket)
    }

    fn compiled(&self) -> Compiled {
        let u = (0..self.n).map(|a| Expr::mul_s(Expr::constant(0.5), self.xa(a, &self.upsilon))).collect();
        let w = (0..self.n).map(|a| Expr::mul_s(Expr::constant(-0.5), self.ya(a, &self.upsilon))).collect();
        Compiled { n: self.n, upsilon: self.upsilon.clone(), u, w, curvature: self.scalar_curvature_expr() }
    }
}

fn z_norm_sq(n: usize) -> Expr {
    let mut acc = Expr::constant(0.0);
    for a in 0..n {
        acc = Expr::add_s(acc, Expr::add_s(Expr::var(a).powi(2), Expr::var(n + a).powi(2)));
    }
    acc
}

/// Complex expression in real-imaginary split form.
#[derive(Clone, Debug)]
struct Cx {
    re: Expr,
    im: Expr,
}

impl Cx {
    fn real(e: Expr) -> Self {
        Cx { re: e, im: Expr::constant(0.0) }
    }
    fn add(self, o: Cx) -> Cx {
        Cx { re: Expr::add_s(self.re, o.re), im: Expr::add_s(self.im, o.im) }
    }
    fn scale(self, c: f64) -> Cx {
        Cx { re: Expr::mul_s(Expr::constant(c), self.re), im: Expr::mul_s(Expr::constant(c), self.im) }
    }
    fn eval_abs_sq(&self, x: &[f64]) -> f64 {
        self.re.eval(x).powi(2) + self.im.eval(x).powi(2)
    }
}

/// Frame quantities of a rescaled model, ready for pointwise evaluation.
struct Compiled {
    n: usize,
    upsilon: Expr,
    /// `Υ^α = u_α + i w_α`.
    u: Vec<Expr>,
    w: Vec<Expr>,
    curvature: Expr,
}

/// Contact form `θ₀ = dt + 2Σ(x dy − y dx)` at `x`.
fn theta0<T: Real>(n: usize, x: &[T]) -> Vec<T> {
    let mut c = vec![T::zero(); 2 * n + 1];
    for a in 0..n {
        c[a] = x[n + a].scale(-2.0);
        c[n + a] = x[a].scale(2.0);
    }
    c[2 * n] = T::one();
    c
}

struct HeisenbergModel {
    n: usize,
}

impl GenericModel for HeisenbergModel {
    fn dim(&self) -> usize {
        2 * self.n + 1
    }
    fn components_generic<T: Real>(&self, x: &[T]) -> Components<T> {
        let d = 2 * self.n + 1;
        let mut metric = vec![T::zero(); d * d];
        for i in 0..2 * self.n {
            metric[i * d + i] = T::constant(2.0);
        }
        Components { metric, oneform: theta0(self.n, x) }
    }
}

/// `ω = dt + 2Σ(x dy − y dx)`, `g = 2Σ(dx² + dy²)`; `g` is degenerate along `∂_t`.
pub fn heisenberg_kropina(n: usize) -> KropinaStructure {
    assert!(n >= 1, "CR dimension must be at least 1");
    KropinaStructure::new(HeisenbergModel { n }, format!("heisenberg:{n}"))
}

struct RescaledModel(Compiled);

impl GenericModel for RescaledModel {
    fn dim(&self) -> usize {
        2 * self.0.n + 1
    }
    fn components_generic<T: Real>(&self, x: &[T]) -> Components<T> {
        let c = &self.0;
        let n = c.n;
        let d = 2 * n + 1;
        let th = theta0(n, x);
        let e = c.upsilon.eval(x).exp();
        let kappa = c.curvature.eval(x).scale(1.0 / (n as f64 * (n as f64 + 1.0)));
        let mut metric = vec![T::zero(); d * d];
        let two_e = e.scale(2.0);
        for a in 0..n {
            let u = c.u[a].eval(x);
            let w = c.w[a].eval(x);
            // P = dx − w θ₀, Q = dy + u θ₀
            let mut p = th.iter().map(|&v| -(w * v)).collect::<Vec<T>>();
            p[a] = p[a] + T::one();
            let mut q = th.iter().map(|&v| u * v).collect::<Vec<T>>();
            q[n + a] = q[n + a] + T::one();
            for i in 0..d {
                for j in 0..d {
                    metric[i * d + j] = metric[i * d + j] + two_e * (p[i] * p[j] + q[i] * q[j]);
                }
            }
        }
        let ke2 = kappa * e * e;
        for i in 0..d {
            for j in 0..d {
                metric[i * d + j] = metric[i * d + j] + ke2 * th[i] * th[j];
            }
        }
        Components { metric, oneform: th.into_iter().map(|v| e * v).collect() }
    }
}

/// Kropina structure of `θ = e^Υ θ₀`: `ω = θ`,
/// `g = 2e^Υ Σ|θ̂^α|² + R/(n(n+1)) θ⊗θ` with `θ̂^α = dz^α + iΥ^α θ₀`.
pub fn rescaled_kropina(spec: &CRModelSpec) -> KropinaStructure {
    KropinaStructure::new(RescaledModel(spec.compiled()), spec.label.clone())
}

/// Warning text when `Υ` is not CR pluriharmonic at `x` within `tol`.
pub fn pluriharmonic_warning(spec: &CRModelSpec, x: &[f64], tol: f64) -> Option<String> {
    match pluriharmonic_residual(spec, x) {
        Ok(r) if r.res1 <= tol && r.res2 <= tol => None,
        Ok(r) => Some(format!(
            "Υ is not CR pluriharmonic at the probe point (res1 = {:e}, res2 = {:e}); chain interpretation not guaranteed",
            r.res1, r.res2
        )),
        Err(e) => Some(e.to_string()),
    }
}

/// Tanaka–Webster scalar curvature `R̂ = e^{−Υ}[(n+1)Δ_bΥ − n(n+1)Υ_αΥ^α]`
/// of `e^Υ θ₀`.
pub fn tw_scalar_curvature(spec: &CRModelSpec, x: &[f64]) -> Result<f64> {
    check_point(spec, x)?;
    let r = spec.scalar_curvature_expr().eval(x);
    if !r.is_finite() {
        return Err(Error::SingularPoint);
    }
    Ok(r)
}

fn check_point(spec: &CRModelSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch(format!("expected {} coordinates, got {}", spec.dim(), x.len())));
    }
    if !spec.upsilon.eval(x).is_finite() {
        return Err(Error::SingularPoint);
    }
    Ok(())
}

/// Closed form `R = n(n+1)|z|²/(2ρ²)` for `Υ = −2 log ρ`.
pub fn burns_shnider_scalar(n: usize, x: &[f64]) -> Result<f64> {
    if x.len() != 2 * n + 1 {
        return Err(Error::DimensionMismatch(format!("expected {} coordinates, got {}", 2 * n + 1, x.len())));
    }
    let z2: f64 = x[..2 * n].iter().map(|v| v * v).sum();
    let t = x[2 * n];
    if z2 == 0.0 && t == 0.0 {
        return Err(Error::OriginExcluded);
    }
    let rho2 = (z2 * z2 + t * t).sqrt();
    let nf = n as f64;
    Ok(nf * (nf + 1.0) * z2 / (2.0 * rho2))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct PluriharmonicResidual {
    pub res1: f64,
    pub res2: f64,
}

/// Defects of `Z_αZ_β̄Υ = (1/n)(Σ_γ Z_γZ_γ̄Υ)δ_{αβ}` (`res1`, zero for `n = 1`)
/// and `Σ_β Z_αZ_β Υ^β = 0` (`res2`).
pub fn pluriharmonic_residual(spec: &CRModelSpec, x: &[f64]) -> Result<PluriharmonicResidual> {
    check_point(spec, x)?;
    let n = spec.n;
    let ups = Cx::real(spec.upsilon.clone());
    let raised: Vec<Cx> = (0..n).map(|b| spec.zbar(b, &ups).scale(0.5)).collect();
    let mut res2_sq = 0.0;
    for a in 0..n {
        let mut acc = Cx::real(Expr::constant(0.0));
        for (b, ub) in raised.iter().enumerate() {
            acc = acc.add(spec.z(a, &spec.z(b, ub)));
        }
        res2_sq += acc.eval_abs_sq(x);
    }
    let mut res1_sq = 0.0;
    if n > 1 {
        let zb: Vec<Cx> = (0..n).map(|b| spec.zbar(b, &ups)).collect();
        let mut m = vec![(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let v = spec.z(a, &zb[b]);
                m[a * n + b] = (v.re.eval(x), v.im.eval(x));
            }
        }
        let tr = (0..n).fold((0.0, 0.0), |acc, g| (acc.0 + m[g * n + g].0, acc.1 + m[g * n + g].1));
        for a in 0..n {
            for b in 0..n {
                let (mut re, mut im) = m[a * n + b];
                if a == b {
                    re -= tr.0 / n as f64;
                    im -= tr.1 / n as f64;
                }
                res1_sq += re * re + im * im;
            }
        }
    }
    let out = PluriharmonicResidual { res1: res1_sq.sqrt(), res2: res2_sq.sqrt() };
    if !out.res1.is_finite() || !out.res2.is_finite() {
        return Err(Error::SingularPoint);
    }
    Ok(out)
}

/// `|Pf|` of the skew matrix `[[0, ω],[−ωᵀ, dω]]`; nonzero iff `ω∧(dω)ⁿ ≠ 0`.
pub fn contact_volume(s: &KropinaStructure, x: &Point) -> f64 {
    let jet = s.jet(x);
    let dw = jet.d_oneform();
    let d = s.dim();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        m[(0, i + 1)] = jet.oneform[i];
        m[(i + 1, 0)] = -jet.oneform[i];
        for j in 0..d {
            m[(i + 1, j + 1)] = dw[(i, j)];
        }
    }
    m.determinant().abs().sqrt()
}

/// Reeb field of the flat model.
pub fn reeb(n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(2 * n + 1);
    v[2 * n] = 1.0;
    v
}
