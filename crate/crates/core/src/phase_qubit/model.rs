//! Three-level readout model: generators, target channel and contrast.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::dvr::{dvr_solve, DvrGrid};
use super::fits::QubitModelFits;
use super::params::QubitParams;
use super::potential::bisect;
use crate::channel::ChoiMatrix;
use crate::error::{Error, Result};
use crate::liouville::{
    build_generator, commutator_superop, dissipator_superop, dissipator_superop_derivative, CMatrix,
    DecayChannel, Generator, HamiltonianMatrix, Propagator,
};
use crate::optimizer::{Contrast, ControlModel, Readout};

pub const GROUND: usize = 0;
pub const EXCITED: usize = 1;
/// The continuum the shallow-well states tunnel into.
pub const TUNNELED: usize = 2;

pub const READOUT: Readout = Readout {
    bright: EXCITED,
    dark: GROUND,
    pointer: TUNNELED,
};

fn ket_bra(i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}

fn real(m: nalgebra::Matrix3<f64>) -> CMatrix {
    CMatrix::from_fn(3, 3, |i, j| Complex64::new(m[(i, j)], 0.0))
}

/// WKB escape rates `(γ0, γ1)` of the cubic well, 1/ns.
pub fn wkb_rates_from(alpha: f64, omega: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::Validity(format!("barrier parameter alpha = {alpha} must be positive")));
    }
    let decay = (-1.2 * alpha).exp();
    Ok((
        6.0 * omega * (alpha / PI).sqrt() * decay,
        432.0 * omega * (alpha.powi(3) / PI).sqrt() * decay,
    ))
}

/// Tunneling rates and their bias derivatives from the fitted curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingRates {
    pub gamma0: f64,
    pub gamma1: f64,
    pub d_gamma0: f64,
    pub d_gamma1: f64,
}

pub fn wkb_rates(phi_b: f64, fits: &QubitModelFits) -> Result<TunnelingRates> {
    let (alpha, d_alpha) = (fits.alpha.eval(phi_b), fits.alpha.derivative(phi_b));
    let (omega, d_omega) = (fits.omega.eval(phi_b), fits.omega.derivative(phi_b));
    let (gamma0, gamma1) = wkb_rates_from(alpha, omega)?;
    let log_omega = d_omega / omega;
    Ok(TunnelingRates {
        gamma0,
        gamma1,
        d_gamma0: gamma0 * (log_omega + d_alpha * (0.5 / alpha - 1.2)),
        d_gamma1: gamma1 * (log_omega + d_alpha * (1.5 / alpha - 1.2)),
    })
}

/// Largest bias at which `γ1`, from the direct α and the DVR frequency, stays
/// below `threshold`. Searched on `[0.85, 0.945]·2π`.
pub fn find_reference_bias(params: &QubitParams, grid: &DvrGrid, threshold: f64) -> Result<f64> {
    let log_rate = |phi_b: f64| -> Result<f64> {
        let sol = dvr_solve(phi_b, params, grid)?;
        Ok(wkb_rates_from(sol.analysis.alpha, sol.transition_frequency())?.1.ln() - threshold.ln())
    };
    let (lo, hi) = (0.85 * TAU, 0.945 * TAU);
    let (g_lo, g_hi) = (log_rate(lo)?, log_rate(hi)?);
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::Config(format!(
            "tunneling rate threshold {threshold:e} /ns is not crossed on [0.85, 0.945]*2pi"
        )));
    }
    // the error path cannot trigger inside the bracket: the well exists throughout
    Ok(bisect(lo, hi, |x| log_rate(x).unwrap_or(f64::NAN)))
}

/// `P = [[η, s, 0], [s, -η, 0], [0, 0, 1]]` with `s = sqrt(1 - η^2)`.
pub fn mixing_matrix(eta: f64, s: f64) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::new(eta, s, 0.0, s, -eta, 0.0, 0.0, 0.0, 1.0)
}

pub fn drift_generator(params: &QubitParams) -> Result<Generator> {
    let ch = DecayChannel::new(ket_bra(GROUND, EXCITED), params.gamma_relax())?;
    build_generator(&HamiltonianMatrix::zeros(3), &[ch])
}

/// Basis in which the tunneling operators act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TunnelingBasis {
    /// `|m><j| P`: the instantaneous well states tunnel.
    #[default]
    Instantaneous,
    /// `|m><j|`: the reference-bias states tunnel.
    Reference,
}

/// Control generator at `phi_b` and its derivative in `phi_b`.
pub fn control_generator(
    phi_b: f64,
    fits: &QubitModelFits,
    basis: TunnelingBasis,
) -> Result<(Generator, Generator)> {
    if phi_b > fits.validity_limit {
        return Err(Error::Validity(format!(
            "bias {:.6}*2pi exceeds the three-level limit {:.6}*2pi",
            phi_b / TAU,
            fits.validity_limit / TAU
        )));
    }
    let eta = fits.eta.eval(phi_b);
    let d_eta = fits.eta.derivative(phi_b);
    let (s, d_s) = fits.eta.mixing(phi_b);
    let p = mixing_matrix(eta, s);
    let mut dp = mixing_matrix(d_eta, d_s);
    dp[(TUNNELED, TUNNELED)] = 0.0;

    // P|1><1|P = v v^T with v = P|1>
    let w = fits.omega_ref;
    let v = p.column(EXCITED).into_owned();
    let dv = dp.column(EXCITED).into_owned();
    let h = real(v * v.transpose() * w);
    let dh = real((dv * v.transpose() + v * dv.transpose()) * w);

    let rates = wkb_rates(phi_b, fits)?;
    let mut s_c = commutator_superop(&h);
    let mut ds_c = commutator_superop(&dh);
    for (j, gamma, d_gamma) in [
        (GROUND, rates.gamma0, rates.d_gamma0),
        (EXCITED, rates.gamma1, rates.d_gamma1),
    ] {
        let (l, dl) = match basis {
            TunnelingBasis::Instantaneous => (ket_bra(TUNNELED, j) * real(p), ket_bra(TUNNELED, j) * real(dp)),
            TunnelingBasis::Reference => (ket_bra(TUNNELED, j), CMatrix::zeros(3, 3)),
        };
        let dis = dissipator_superop(&l);
        s_c += &dis * Complex64::new(gamma, 0.0);
        ds_c += dis * Complex64::new(d_gamma, 0.0) + dissipator_superop_derivative(&l, &dl) * Complex64::new(gamma, 0.0);
    }
    Ok((Generator::from_matrix(s_c)?, Generator::from_matrix(ds_c)?))
}

/// `|1><1| ⊗ |m><m| + Σ_{i,j ∈ {0,m}} |i><j| ⊗ |i><j|`.
pub fn target_choi() -> ChoiMatrix {
    let mut c = ket_bra(EXCITED, EXCITED).kronecker(&ket_bra(TUNNELED, TUNNELED));
    for i in [GROUND, TUNNELED] {
        for j in [GROUND, TUNNELED] {
            c += ket_bra(i, j).kronecker(&ket_bra(i, j));
        }
    }
    ChoiMatrix::from_matrix(c).unwrap()
}

pub fn contrast(t: &Propagator) -> Result<Contrast> {
    READOUT.contrast(t)
}

/// The biased phase qubit as a controllable three-level system.
#[derive(Debug, Clone)]
pub struct PhaseQubitModel {
    pub params: QubitParams,
    pub fits: QubitModelFits,
    pub basis: TunnelingBasis,
    drift: Generator,
}

impl PhaseQubitModel {
    pub fn new(params: QubitParams, fits: QubitModelFits, basis: TunnelingBasis) -> Result<Self> {
        let drift = drift_generator(&params)?;
        Ok(Self {
            params,
            fits,
            basis,
            drift,
        })
    }
}

impl ControlModel for PhaseQubitModel {
    fn dim(&self) -> usize {
        3
    }

    fn drift(&self) -> &Generator {
        &self.drift
    }

    fn control(&self, u: f64) -> Result<(Generator, Generator)> {
        control_generator(u, &self.fits, self.basis)
    }
}
