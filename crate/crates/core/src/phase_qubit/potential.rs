//! The phase-qubit potential and its cubic-well parameters.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::params::QubitParams;
use crate::error::{Error, Result};

/// `V = E_J ((φ - φ_b)^2 / 2β - cos φ)`, rad/ns.
pub fn potential(phi: f64, phi_b: f64, p: &QubitParams) -> f64 {
    p.e_j() * ((phi - phi_b).powi(2) / (2.0 * p.beta) - phi.cos())
}

pub fn potential_derivative(phi: f64, phi_b: f64, p: &QubitParams) -> f64 {
    p.e_j() * ((phi - phi_b) / p.beta + phi.sin())
}

/// Root of `f` in `[lo, hi]`, which must bracket a sign change.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Shallow-well extrema and the cubic-well parameters derived from them.
/// Units: phases in rad, energies and frequencies in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialAnalysis {
    pub phi_b: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub alpha: f64,
    pub omega_harmonic: f64,
    /// `hbar^2 / 2 E_c` with hbar = 1.
    pub m: f64,
    /// Cubic width parameter.
    pub phi_tilde: f64,
}

impl PotentialAnalysis {
    pub fn barrier(&self) -> f64 {
        self.v_max - self.v_min
    }

    /// `m ω^2 φ̃^2 / ω` composed from the cubic parameters.
    pub fn alpha_from_cubic(&self) -> f64 {
        self.m * self.omega_harmonic.powi(2) * self.phi_tilde.powi(2) / self.omega_harmonic
    }
}

const SCAN_POINTS: usize = 4096;

/// Locates the shallow-well minimum and the barrier maximum on `(0, π)`:
/// the first `-` to `+` sign change of `V'` and the next `+` to `-` one.
pub fn find_well_extrema(phi_b: f64, p: &QubitParams) -> Result<PotentialAnalysis> {
    let dv = |x: f64| potential_derivative(x, phi_b, p);
    let step = PI / SCAN_POINTS as f64;
    let mut min_bracket = None;
    let mut max_bracket = None;
    let mut prev = dv(0.0);
    for k in 1..=SCAN_POINTS {
        let x = k as f64 * step;
        let cur = dv(x);
        match (min_bracket, prev < 0.0 && cur >= 0.0, prev > 0.0 && cur <= 0.0) {
            (None, true, _) => min_bracket = Some((x - step, x)),
            (Some(_), _, true) => {
                max_bracket = Some((x - step, x));
                break;
            }
            _ => {}
        }
        prev = cur;
    }
    let (Some((a0, a1)), Some((b0, b1))) = (min_bracket, max_bracket) else {
        return Err(Error::WellDisappeared {
            phi_b_over_2pi: phi_b / TAU,
        });
    };
    let phi_min = bisect(a0, a1, dv);
    let phi_max = bisect(b0, b1, dv);
    let v_min = potential(phi_min, phi_b, p);
    let v_max = potential(phi_max, phi_b, p);

    let curvature = 1.0 / p.beta + phi_min.cos();
    let omega_harmonic = (2.0 * p.e_c() * p.e_j() * curvature).sqrt();
    let m = 1.0 / (2.0 * p.e_c());
    let barrier = v_max - v_min;
    let phi_tilde = (6.0 * barrier / (m * omega_harmonic * omega_harmonic)).sqrt();
    Ok(PotentialAnalysis {
        phi_b,
        phi_min,
        phi_max,
        v_min,
        v_max,
        alpha: 6.0 * barrier / omega_harmonic,
        omega_harmonic,
        m,
        phi_tilde,
    })
}

/// Barrier parameter `α = 6 (V_max - V_min) / hbar ω` of the cubic well.
pub fn alpha_of_bias(phi_b: f64, p: &QubitParams) -> Result<f64> {
    Ok(find_well_extrema(phi_b, p)?.alpha)
}
