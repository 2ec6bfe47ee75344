use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge, C (exact SI value).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Circuit parameters of a flux-biased phase qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitParams {
    /// Junction critical current, μA.
    pub i0_ua: f64,
    /// Junction capacitance, pF.
    pub c_pf: f64,
    /// Dimensionless flux coupling `2 e L I0 / hbar`.
    pub beta: f64,
    /// Energy relaxation time, ns.
    pub t1_ns: f64,
}

impl Default for QubitParams {
    fn default() -> Self {
        Self {
            i0_ua: 2.0,
            c_pf: 1.0,
            beta: 4.375,
            t1_ns: 500.0,
        }
    }
}

impl QubitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("i0_ua", self.i0_ua),
            ("c_pf", self.c_pf),
            ("beta", self.beta),
            ("t1_ns", self.t1_ns),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("qubit parameter {name} must be positive, got {v}")));
            }
        }
        if self.e_j() < 100.0 * self.e_c() {
            return Err(Error::Config(format!(
                "E_J/E_c = {:.1} is too small for the phase regime",
                self.e_j() / self.e_c()
            )));
        }
        Ok(())
    }

    /// Charging energy `2 e^2 / C` over hbar, rad/ns.
    pub fn e_c(&self) -> f64 {
        let c = self.c_pf * 1e-12;
        2.0 * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (c * HBAR) * 1e-9
    }

    /// Josephson energy `I0 hbar / 2e` over hbar, rad/ns.
    pub fn e_j(&self) -> f64 {
        self.i0_ua * 1e-6 / (2.0 * ELEMENTARY_CHARGE) * 1e-9
    }

    /// T1 decay rate, 1/ns.
    pub fn gamma_relax(&self) -> f64 {
        1.0 / self.t1_ns
    }
}
