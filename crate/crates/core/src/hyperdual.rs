//! Second-order two-variable jet arithmetic: every value carries its exact
//! first and second partial derivatives with respect to two coordinates
//! (here always a time and a radius).
//!
//! Propagating jets through a closed-form expression yields machine-precision
//! derivatives with no truncation error, which makes them the reference
//! oracle for validating finite-difference operator assembly and for
//! generating manufactured-solution source terms.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value plus exact derivatives (d_t, d_r, d_tt, d_tr, d_rr).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub val: f64,
    pub dt: f64,
    pub dr: f64,
    pub dtt: f64,
    pub dtr: f64,
    pub drr: f64,
}

impl Jet2 {
    pub const fn constant(c: f64) -> Self {
        Self { val: c, dt: 0.0, dr: 0.0, dtt: 0.0, dtr: 0.0, drr: 0.0 }
    }

    /// The first coordinate as a jet: d_t(t) = 1.
    pub const fn var_t(t: f64) -> Self {
        Self { val: t, dt: 1.0, dr: 0.0, dtt: 0.0, dtr: 0.0, drr: 0.0 }
    }

    /// The second coordinate as a jet: d_r(r) = 1.
    pub const fn var_r(r: f64) -> Self {
        Self { val: r, dt: 0.0, dr: 1.0, dtt: 0.0, dtr: 0.0, drr: 0.0 }
    }

    /// Chain rule for a scalar function with derivatives u', u'' at self.val.
    fn lift(self, u: f64, du: f64, ddu: f64) -> Self {
        Self {
            val: u,
            dt: du * self.dt,
            dr: du * self.dr,
            dtt: ddu * self.dt * self.dt + du * self.dtt,
            dtr: ddu * self.dt * self.dr + du * self.dtr,
            drr: ddu * self.dr * self.dr + du * self.drr,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.val.exp();
        self.lift(e, e, e)
    }

    pub fn ln(self) -> Self {
        let v = self.val;
        self.lift(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.lift(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.lift(c, -s, -c)
    }

    pub fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.lift(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn recip(self) -> Self {
        let v = self.val;
        self.lift(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.val;
        self.lift(
            v.powi(n),
            f64::from(n) * v.powi(n - 1),
            f64::from(n) * f64::from(n - 1) * v.powi(n - 2),
        )
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            val: self.val + o.val,
            dt: self.dt + o.dt,
            dr: self.dr + o.dr,
            dtt: self.dtt + o.dtt,
            dtr: self.dtr + o.dtr,
            drr: self.drr + o.drr,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            val: self.val - o.val,
            dt: self.dt - o.dt,
            dr: self.dr - o.dr,
            dtt: self.dtt - o.dtt,
            dtr: self.dtr - o.dtr,
            drr: self.drr - o.drr,
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            val: -self.val,
            dt: -self.dt,
            dr: -self.dr,
            dtt: -self.dtt,
            dtr: -self.dtr,
            drr: -self.drr,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            val: self.val * o.val,
            dt: self.dt * o.val + self.val * o.dt,
            dr: self.dr * o.val + self.val * o.dr,
            dtt: self.dtt * o.val + 2.0 * self.dt * o.dt + self.val * o.dtt,
            dtr: self.dtr * o.val + self.dt * o.dr + self.dr * o.dt + self.val * o.dtr,
            drr: self.drr * o.val + 2.0 * self.dr * o.dr + self.val * o.drr,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, c: f64) -> Jet2 {
        self + Jet2::constant(c)
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(self, c: f64) -> Jet2 {
        self - Jet2::constant(c)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        Jet2 {
            val: self.val * c,
            dt: self.dt * c,
            dr: self.dr * c,
            dtt: self.dtt * c,
            dtr: self.dtr * c,
            drr: self.drr * c,
        }
    }
}

impl Div<f64> for Jet2 {
    type Output = Jet2;
    fn div(self, c: f64) -> Jet2 {
        self * (1.0 / c)
    }
}

impl Mul<Jet2> for f64 {
    type Output = Jet2;
    fn mul(self, j: Jet2) -> Jet2 {
        j * self
    }
}

impl Add<Jet2> for f64 {
    type Output = Jet2;
    fn add(self, j: Jet2) -> Jet2 {
        j + self
    }
}

impl Sub<Jet2> for f64 {
    type Output = Jet2;
    fn sub(self, j: Jet2) -> Jet2 {
        Jet2::constant(self) - j
    }
}

impl Div<Jet2> for f64 {
    type Output = Jet2;
    fn div(self, j: Jet2) -> Jet2 {
        j.recip() * self
    }
}
