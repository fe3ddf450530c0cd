//! Conformal automorphisms of the unit disk and the disk-to-strip map.

use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;

pub fn wrap_angle(t: f64) -> f64 {
    let r = t % (2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

/// The disk automorphism z -> e^{i theta} (z - a) / (1 - conj(a) z), |a| < 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius {
    theta: f64,
    a: Complex64,
}

impl Moebius {
    pub fn new(theta: f64, a: Complex64) -> Result<Self> {
        if !(a.norm() < 1.0) || !theta.is_finite() {
            bail!(
                InvalidArgument,
                "Moebius parameter a = {a} must satisfy |a| < 1"
            );
        }
        Ok(Self {
            theta: wrap_angle(theta),
            a,
        })
    }

    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            a: Complex64::new(0.0, 0.0),
        }
    }

    pub fn rotation(theta: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            a: Complex64::new(0.0, 0.0),
        }
    }

    /// The hyperbolic automorphism fixing -1 and 1 that acts as translation by
    /// `t` in strip coordinates.
    pub fn strip_translation(t: f64) -> Self {
        Self {
            theta: 0.0,
            a: Complex64::new(-(t / 4.0).tanh(), 0.0),
        }
    }

    /// An automorphism sending the boundary points `x` and `y` to -1 and 1.
    pub fn sending_to_pm1(x: Complex64, y: Complex64) -> Result<Self> {
        let (x, y) = (x / x.norm(), y / y.norm());
        if (x - y).norm() < 1e-12 || !x.re.is_finite() || !y.re.is_finite() {
            bail!(Geometry, "marked points must be distinct boundary points");
        }
        let u0 = |z: Complex64| (z - x) / (z - y);
        // A third boundary point: its image spans the boundary line of u0(D).
        let mut b = -(x + y);
        if b.norm() < 1e-6 {
            b = x * Complex64::i();
        }
        let d = u0(b / b.norm());
        let mut lambda = Complex64::i() * d.conj() / d.norm();
        if (lambda * u0(Complex64::new(0.0, 0.0))).re < 0.0 {
            lambda = -lambda;
        }
        let one = Complex64::new(1.0, 0.0);
        let a = (lambda * x - y) / (lambda - one);
        let u = lambda * x / y;
        let du = lambda * (x - y) / (y * y);
        let deriv0 = 2.0 * du / ((u + one) * (u + one));
        let theta = deriv0.arg();
        Self::new(theta, a)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn is_identity(&self) -> bool {
        self.theta == 0.0 && self.a == Complex64::new(0.0, 0.0)
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        Complex64::from_polar(1.0, self.theta) * (z - self.a) / (one - self.a.conj() * z)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let den = one - self.a.conj() * z;
        Complex64::from_polar(1.0, self.theta) * (1.0 - self.a.norm_sqr()) / (den * den)
    }

    pub fn inverse(&self) -> Self {
        // w = e^{it}(z-a)/(1-conj(a) z)  <=>  z = (e^{-it} w + a)/(1 + conj(a) e^{-it} w),
        // which is e^{-it}(w - b)/(1 - conj(b) w) with b = -a e^{it}.
        let b = -self.a * Complex64::from_polar(1.0, self.theta);
        Self {
            theta: wrap_angle(-self.theta),
            a: b,
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Moebius) -> Moebius {
        let b = other
            .inverse()
            .apply(self.inverse().apply(Complex64::new(0.0, 0.0)));
        let d0 = self.derivative(other.apply(b)) * other.derivative(b);
        // h(z) = e^{i phi}(z-b)/(1-conj(b) z) has h'(b) = e^{i phi}/(1-|b|^2).
        Moebius {
            theta: wrap_angle(d0.arg()),
            a: b,
        }
    }
}

/// The map D -> S = R x (0, 2 pi), z -> 2 log((1+z)/(1-z)) + i pi, sending
/// -1, 1 to -inf, +inf and -i, i to 0, 2 pi i.
pub fn disk_to_strip(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let w = 2.0 * ((one + z) / (one - z)).ln();
    // Principal log gives imaginary part in (-pi, pi]; shift into (0, 2 pi).
    w + Complex64::new(0.0, PI)
}

/// Derivative of [`disk_to_strip`], 4 / (1 - z^2).
pub fn disk_to_strip_derivative(z: Complex64) -> Complex64 {
    Complex64::new(4.0, 0.0) / (Complex64::new(1.0, 0.0) - z * z)
}

/// Inverse of [`disk_to_strip`]: w -> tanh((w - i pi)/4).
pub fn strip_to_disk(w: Complex64) -> Complex64 {
    ((w - Complex64::new(0.0, PI)) / 4.0).tanh()
}
