//! Scalar abstraction shared by plain `f64` evaluation and forward-mode
//! automatic differentiation.
//!
//! Model formulas are written once, generically over [`Real`], and evaluated
//! either at plain points or at dual points to obtain exact directional
//! derivatives. Duals nest (`Dual<Dual<f64>>`) for higher orders.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    /// Primal (lowest-order) value.
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: Self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn one() -> Self {
        Self::constant(1.0)
    }
    fn scale(self, c: f64) -> Self {
        self * Self::constant(c)
    }
}

impl Real for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
}

/// First-order dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

pub type Dual64 = Dual<f64>;

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    pub fn variable(re: T) -> Self {
        Dual { re, eps: T::one() }
    }

    pub fn lift(re: T) -> Self {
        Dual { re, eps: T::zero() }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let re = self.re * inv;
        Dual::new(re, (self.eps - re * o.eps) * inv)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Real> Real for Dual<T> {
    fn constant(c: f64) -> Self {
        Dual::lift(T::constant(c))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / s.scale(2.0))
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => {
                let p = self.re.powi(n - 1);
                Dual::new(p * self.re, self.eps * p.scale(n as f64))
            }
        }
    }
    fn powf(self, e: Self) -> Self {
        // a^b = exp(b ln a); the constant-exponent case avoids ln(a) in eps.
        let v = self.re.powf(e.re);
        let d_base = e.re * self.re.powf(e.re - T::one()) * self.eps;
        let d_exp = if e.eps == T::zero() {
            T::zero()
        } else {
            v * self.re.ln() * e.eps
        };
        Dual::new(v, d_base + d_exp)
    }
}

/// Gradient of a scalar function at `x` by forward seeding, one pass per
/// coordinate.
pub fn gradient<T: Real>(f: impl Fn(&[Dual<T>]) -> Dual<T>, x: &[T]) -> Vec<T> {
    let mut buf: Vec<Dual<T>> = x.iter().map(|&v| Dual::lift(v)).collect();
    (0..x.len())
        .map(|k| {
            buf[k].eps = T::one();
            let d = f(&buf).eps;
            buf[k].eps = T::zero();
            d
        })
        .collect()
}
