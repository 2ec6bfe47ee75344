//! Flux-biased phase qubit: potential, shallow-well DVR, fitted three-level
//! model and the readout target.
//!
//! Biases are phases in radians here; artifacts report them in units of 2π.

mod dvr;
mod fits;
mod model;
mod params;
mod potential;

pub use dvr::{dvr_solve, dvr_solve_checked, eta_overlap, interval_dvr, DvrGrid, DvrSolution, IntervalSpectrum};
pub use fits::{
    fit_model_curves, polyfit, validity_limit, EtaFit, FitQualityReport, FitSample, FitSettings, Polynomial,
    PowerLawFit, QubitModelFits, ALPHA_THRESHOLD,
};
pub use model::{
    contrast, control_generator, drift_generator, find_reference_bias, mixing_matrix, target_choi, wkb_rates,
    wkb_rates_from, PhaseQubitModel, TunnelingBasis, TunnelingRates, EXCITED, GROUND, READOUT, TUNNELED,
};
pub use params::{QubitParams, ELEMENTARY_CHARGE, HBAR};
pub use potential::{alpha_of_bias, find_well_extrema, potential, potential_derivative, PotentialAnalysis};

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::Result;

/// Everything needed to build the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub qubit: QubitParams,
    pub dvr: DvrGrid,
    pub fit: FitSettings,
    /// Fixed reference bias in units of 2π; found from `reference_rate` when absent.
    pub phi_ref_over_2pi: Option<f64>,
    /// `γ1` at the reference bias, 1/ns.
    pub reference_rate: f64,
    pub tunneling_basis: TunnelingBasis,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            qubit: QubitParams::default(),
            dvr: DvrGrid::default(),
            fit: FitSettings::default(),
            phi_ref_over_2pi: None,
            reference_rate: 1e-6,
            tunneling_basis: TunnelingBasis::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.qubit.validate()?;
        self.dvr.validate()?;
        if self.fit.n_points < 6 {
            return Err(crate::Error::Config("fit.n_points must be at least 6".into()));
        }
        if !(self.reference_rate > 0.0) {
            return Err(crate::Error::Config("reference_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn reference_bias(&self) -> Result<f64> {
        match self.phi_ref_over_2pi {
            Some(f) => Ok(f * TAU),
            None => find_reference_bias(&self.qubit, &self.dvr, self.reference_rate),
        }
    }

    /// Fits the model curves; returns them with the sampled data.
    pub fn fit(&self) -> Result<(QubitModelFits, Vec<FitSample>)> {
        self.validate()?;
        let phi_ref = self.reference_bias()?;
        fit_model_curves(&self.qubit, &self.dvr, &self.fit, phi_ref)
    }

    pub fn model(&self, fits: QubitModelFits) -> Result<PhaseQubitModel> {
        PhaseQubitModel::new(self.qubit.clone(), fits, self.tunneling_basis)
    }
}
