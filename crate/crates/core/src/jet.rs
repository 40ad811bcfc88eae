//! Second-order forward-mode differentiation, used to obtain exact first and
//! second derivatives of closed-form profiles.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalars supporting the operations used by the closed-form formulas.
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn value(self) -> f64;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn value(self) -> f64 {
        self
    }
}

/// Truncated Taylor jet `(f, f', f'')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet {
    /// The independent variable at `t`.
    pub fn var(t: f64) -> Self {
        Self { v: t, d: 1.0, dd: 0.0 }
    }

    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Self { v: f, d: df * self.d, dd: ddf * self.d * self.d + df * self.dd }
    }
}

impl Add for Jet {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { v: self.v + o.v, d: self.d + o.d, dd: self.dd + o.dd }
    }
}

impl Sub for Jet {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }
}

impl Mul for Jet {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}

impl Div for Jet {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let r = 1.0 / o.v;
        let inv = o.chain(r, -r * r, 2.0 * r * r * r);
        self * inv
    }
}

impl Neg for Jet {
    type Output = Self;
    fn neg(self) -> Self {
        Self { v: -self.v, d: -self.d, dd: -self.dd }
    }
}

impl Real for Jet {
    fn cst(v: f64) -> Self {
        Self { v, d: 0.0, dd: 0.0 }
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }
    fn value(self) -> f64 {
        self.v
    }
}
