//! Truncated Taylor ("jet") arithmetic carrying a value and its first three
//! derivatives with respect to a single real variable.
//!
//! All base-flow fields and their radial derivatives are propagated through
//! closed-form expressions with this type, so derivative formulas are never
//! written out by hand and stay consistent with the values.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value and first three derivatives of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3 {
    /// Function value.
    pub f: f64,
    /// First derivative.
    pub d1: f64,
    /// Second derivative.
    pub d2: f64,
    /// Third derivative.
    pub d3: f64,
}

impl Jet3 {
    /// A constant: all derivatives vanish.
    pub fn constant(c: f64) -> Self {
        Jet3 {
            f: c,
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
        }
    }

    /// The identity function evaluated at `x`.
    pub fn var(x: f64) -> Self {
        Jet3 {
            f: x,
            d1: 1.0,
            d2: 0.0,
            d3: 0.0,
        }
    }

    /// Build a jet from explicit value and derivatives.
    pub fn new(f: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Jet3 { f, d1, d2, d3 }
    }

    /// Exponential of the jet (chain rule through third order).
    pub fn exp(self) -> Self {
        let e = self.f.exp();
        let d1 = self.d1 * e;
        let d2 = self.d2 * e + self.d1 * d1;
        let d3 = self.d3 * e + 2.0 * self.d2 * d1 + self.d1 * d2;
        Jet3 { f: e, d1, d2, d3 }
    }

    /// Multiplicative inverse.
    pub fn recip(self) -> Self {
        Jet3::constant(1.0) / self
    }

    /// Integer power by repeated multiplication (exponent >= 0).
    pub fn powi(self, k: u32) -> Self {
        let mut acc = Jet3::constant(1.0);
        for _ in 0..k {
            acc = acc * self;
        }
        acc
    }

    /// Scale by a real constant.
    pub fn scale(self, c: f64) -> Self {
        Jet3 {
            f: c * self.f,
            d1: c * self.d1,
            d2: c * self.d2,
            d3: c * self.d3,
        }
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3 {
            f: self.f + o.f,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d3: self.d3 + o.d3,
        }
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        Jet3 {
            f: self.f - o.f,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d3: self.d3 - o.d3,
        }
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        // Leibniz rule through third order.
        Jet3 {
            f: self.f * o.f,
            d1: self.d1 * o.f + self.f * o.d1,
            d2: self.d2 * o.f + 2.0 * self.d1 * o.d1 + self.f * o.d2,
            d3: self.d3 * o.f + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.f * o.d3,
        }
    }
}

impl Div for Jet3 {
    type Output = Jet3;
    fn div(self, o: Jet3) -> Jet3 {
        // Solve (h * o)^(k) = self^(k) for h's derivatives successively.
        let f = self.f / o.f;
        let d1 = (self.d1 - f * o.d1) / o.f;
        let d2 = (self.d2 - 2.0 * d1 * o.d1 - f * o.d2) / o.f;
        let d3 = (self.d3 - 3.0 * d2 * o.d1 - 3.0 * d1 * o.d2 - f * o.d3) / o.f;
        Jet3 { f, d1, d2, d3 }
    }
}

/// Value and first five derivatives, used internally where composite fields
/// need one or two derivative orders beyond what [`Jet3`] carries (for
/// example the third derivative of a field that is itself built from first
/// derivatives of the base profile).
///
/// Component k of the array is the k-th derivative. Lower components of any
/// arithmetic result never depend on higher components of the operands, so a
/// jet whose top slots are only approximate still produces exact lower-order
/// output slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet5(pub [f64; 6]);

/// Binomial coefficients C(k, j) for k, j <= 5.
const BINOM: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0, 0.0],
    [1.0, 5.0, 10.0, 10.0, 5.0, 1.0],
];

impl Jet5 {
    /// A constant: all derivatives vanish.
    pub fn constant(c: f64) -> Self {
        let mut a = [0.0; 6];
        a[0] = c;
        Jet5(a)
    }

    /// The identity function evaluated at `x`.
    pub fn var(x: f64) -> Self {
        let mut a = [0.0; 6];
        a[0] = x;
        a[1] = 1.0;
        Jet5(a)
    }

    /// k-th derivative component.
    pub fn d(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Trim to a third-order jet.
    pub fn to_jet3(&self) -> Jet3 {
        Jet3::new(self.0[0], self.0[1], self.0[2], self.0[3])
    }

    /// Jet of the derivative function: shifts components down one order.
    /// The top slot is filled with zero, so the result is exact only through
    /// the fourth derivative; lower slots of downstream arithmetic remain
    /// exact regardless.
    pub fn shift(&self) -> Self {
        Jet5([self.0[1], self.0[2], self.0[3], self.0[4], self.0[5], 0.0])
    }

    /// Scale by a real constant.
    pub fn scale(&self, c: f64) -> Self {
        let mut a = self.0;
        for v in &mut a {
            *v *= c;
        }
        Jet5(a)
    }

    /// Exponential via the recurrence y^(k+1) = sum_j C(k,j) u^(j+1) y^(k-j).
    pub fn exp(self) -> Self {
        let mut y = [0.0; 6];
        y[0] = self.0[0].exp();
        for k in 0..5 {
            let mut s = 0.0;
            for j in 0..=k {
                s += BINOM[k][j] * self.0[j + 1] * y[k - j];
            }
            y[k + 1] = s;
        }
        Jet5(y)
    }

    /// Integer power by repeated multiplication (exponent >= 0).
    pub fn powi(self, k: u32) -> Self {
        let mut acc = Jet5::constant(1.0);
        for _ in 0..k {
            acc = acc * self;
        }
        acc
    }
}

impl Add for Jet5 {
    type Output = Jet5;
    fn add(self, o: Jet5) -> Jet5 {
        let mut a = self.0;
        for (v, w) in a.iter_mut().zip(o.0.iter()) {
            *v += w;
        }
        Jet5(a)
    }
}

impl Sub for Jet5 {
    type Output = Jet5;
    fn sub(self, o: Jet5) -> Jet5 {
        let mut a = self.0;
        for (v, w) in a.iter_mut().zip(o.0.iter()) {
            *v -= w;
        }
        Jet5(a)
    }
}

impl Neg for Jet5 {
    type Output = Jet5;
    fn neg(self) -> Jet5 {
        self.scale(-1.0)
    }
}

impl Mul for Jet5 {
    type Output = Jet5;
    fn mul(self, o: Jet5) -> Jet5 {
        let mut a = [0.0; 6];
        for (k, slot) in a.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..=k {
                s += BINOM[k][j] * self.0[j] * o.0[k - j];
            }
            *slot = s;
        }
        Jet5(a)
    }
}

impl Div for Jet5 {
    type Output = Jet5;
    fn div(self, o: Jet5) -> Jet5 {
        // Solve (h * o)^(k) = self^(k) for h's components successively.
        let mut h = [0.0; 6];
        for k in 0..6 {
            let mut s = self.0[k];
            for j in 0..k {
                s -= BINOM[k][j] * h[j] * o.0[k - j];
            }
            h[k] = s / o.0[0];
        }
        Jet5(h)
    }
}
