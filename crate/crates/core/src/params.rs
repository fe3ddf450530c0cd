//! Central charge, background charge and the derived constants used across the
//! crate.

use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
#[allow(unused_imports)]
use crate::float::*;

/// Total central charge of matter plus Liouville.
pub const TOTAL_CENTRAL_CHARGE: f64 = 26.0;

/// The critical Liouville central charge (Q = 2).
pub const CRITICAL_CENTRAL_CHARGE: f64 = 25.0;

const CRITICAL_TOL: f64 = 1e-12;

/// Which side of the critical point a parameter set sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// c_L in (1, 25): complex gamma on the circle |gamma| = 2.
    Supercritical,
    /// c_L = 25.
    Critical,
    /// c_L in (25, 26): real gamma in (0, 2).
    Subcritical,
}

/// Liouville parameters. Constructed from either `c_l` or `q`; every other
/// constant is derived on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    c_l: f64,
    q: f64,
}

impl ParamSet {
    /// Builds from the Liouville central charge, which must lie in (1, 26).
    pub fn from_central_charge(c_l: f64) -> Result<Self> {
        if !c_l.is_finite() || c_l <= 1.0 || c_l >= TOTAL_CENTRAL_CHARGE {
            bail!(ParameterOutOfRange, "c_l = {c_l} must lie in (1, 26)");
        }
        let mut c = c_l;
        if (c - CRITICAL_CENTRAL_CHARGE).abs() < CRITICAL_TOL {
            c = CRITICAL_CENTRAL_CHARGE;
        }
        Ok(Self {
            c_l: c,
            q: ((c - 1.0) / 6.0).sqrt(),
        })
    }

    /// Builds from the background charge Q, which must lie in (0, sqrt(25/6)).
    pub fn from_background_charge(q: f64) -> Result<Self> {
        let q_max = (25.0f64 / 6.0).sqrt();
        if !q.is_finite() || q <= 0.0 || q >= q_max {
            bail!(ParameterOutOfRange, "q = {q} must lie in (0, {q_max})");
        }
        let q = if (q - 2.0).abs() < CRITICAL_TOL {
            2.0
        } else {
            q
        };
        Ok(Self {
            c_l: 1.0 + 6.0 * q * q,
            q,
        })
    }

    /// The critical point c_L = 25.
    pub fn critical() -> Self {
        Self {
            c_l: CRITICAL_CENTRAL_CHARGE,
            q: 2.0,
        }
    }

    pub fn c_l(&self) -> f64 {
        self.c_l
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn regime(&self) -> Regime {
        if self.c_l == CRITICAL_CENTRAL_CHARGE {
            Regime::Critical
        } else if self.c_l < CRITICAL_CENTRAL_CHARGE {
            Regime::Supercritical
        } else {
            Regime::Subcritical
        }
    }

    /// True iff c_L < 25.
    pub fn is_supercritical(&self) -> bool {
        self.regime() == Regime::Supercritical
    }

    /// gamma with Q = 2/gamma + gamma/2, taking the root with nonnegative
    /// imaginary part. For c_L <= 25 this is Q + i sqrt(4 - Q^2); above 25 it
    /// is the real root in (0, 2).
    pub fn gamma(&self) -> Complex64 {
        let d = 4.0 - self.q * self.q;
        if d >= 0.0 {
            Complex64::new(self.q, d.sqrt())
        } else {
            Complex64::new(self.q - (-d).sqrt(), 0.0)
        }
    }

    /// Matter central charge 26 - c_L.
    pub fn dual_c(&self) -> f64 {
        TOTAL_CENTRAL_CHARGE - self.c_l
    }

    /// Background charge of the dual field, sqrt(4 - Q^2). Undefined above 25.
    pub fn dual_q(&self) -> Option<f64> {
        let d = 4.0 - self.q * self.q;
        (d >= 0.0).then(|| d.max(0.0).sqrt())
    }

    /// The gap exponent a = pi sqrt(4 - Q^2) / Q, so that s = e^a.
    pub fn gap_exponent(&self) -> Option<f64> {
        self.dual_q().map(|dq| PI * dq / self.q)
    }

    /// The boundary-length gap s = exp(pi sqrt(4 - Q^2) / Q).
    pub fn s(&self) -> Option<f64> {
        self.gap_exponent().map(f64::exp)
    }

    /// Coefficient of the critical constituent in the composite field, Q/2.
    pub fn critical_weight(&self) -> f64 {
        self.q / 2.0
    }

    /// Coefficient of the zero-boundary constituent, sqrt(4 - Q^2)/2.
    pub fn dual_weight(&self) -> Option<f64> {
        self.dual_q().map(|dq| dq / 2.0)
    }
}

/// Central charge of CLE_kappa / SLE_kappa matter,
/// c(kappa) = 1 - 6 (2/sqrt(kappa) - sqrt(kappa)/2)^2.
pub fn kappa_central_charge(kappa: f64) -> Result<f64> {
    if !kappa.is_finite() || kappa <= 0.0 {
        bail!(ParameterOutOfRange, "kappa = {kappa} must be positive");
    }
    let r = kappa.sqrt();
    let t = 2.0 / r - r / 2.0;
    Ok(1.0 - 6.0 * t * t)
}
