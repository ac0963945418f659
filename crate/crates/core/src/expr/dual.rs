//! Scalars that expression trees can be evaluated over.
//!
//! `f64` gives plain values; [`Dual`] carries one directional derivative
//! alongside the value, so a single pass over a tree yields `f(x)` and
//! `Df(x)·v` for the seeded direction `v`.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn atan(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: Self) -> Self;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
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
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
}

/// Forward-mode dual number `v + d·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }

    pub fn var(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let v = self.v / o.v;
        Dual::new(v, (self.d - v * o.d) / o.v)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        Dual::new(self.v.sin(), self.d * self.v.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.v.cos(), -self.d * self.v.sin())
    }
    fn tan(self) -> Self {
        let t = self.v.tan();
        Dual::new(t, self.d * (1.0 + t * t))
    }
    fn atan(self) -> Self {
        Dual::new(self.v.atan(), self.d / (1.0 + self.v * self.v))
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = self.v * self.v + x.v * x.v;
        Dual::new(self.v.atan2(x.v), (x.v * self.d - self.v * x.d) / r2)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual::new(e, self.d * e)
    }
    fn ln(self) -> Self {
        Dual::new(self.v.ln(), self.d / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual::new(s, self.d / (2.0 * s))
    }
    fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::cst(1.0);
        }
        Dual::new(self.v.powi(n), self.d * n as f64 * self.v.powi(n - 1))
    }
    fn powf(self, e: Self) -> Self {
        let p = self.v.powf(e.v);
        let mut d = self.d * e.v * self.v.powf(e.v - 1.0);
        if e.d != 0.0 {
            d += e.d * self.v.ln() * p;
        }
        Dual::new(p, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::var(3.0);
        let y = x * x * Dual::cst(2.0);
        assert_eq!(y, Dual::new(18.0, 12.0));
    }

    #[test]
    fn quotient_and_chain() {
        let x = Dual::var(0.5);
        let y = (x.sin() / x.exp()).value();
        assert!((y - 0.5f64.sin() / 0.5f64.exp()).abs() < 1e-15);
        let d = (x.sin() / x.exp()).d;
        let expect = (0.5f64.cos() - 0.5f64.sin()) / 0.5f64.exp();
        assert!((d - expect).abs() < 1e-15);
    }

    #[test]
    fn atan2_derivative_matches_angle_rate() {
        // angle of (cos t, sin t) has unit rate
        let t = Dual::var(0.7);
        let a = t.sin().atan2(t.cos());
        assert!((a.v - 0.7).abs() < 1e-15);
        assert!((a.d - 1.0).abs() < 1e-15);
    }
}
