//! Config-driven pipeline: fit the model, optimize a pulse, replay a pulse.

pub mod artifacts;
mod config;

pub use config::{PulseSettings, ResolvedPulse, RunConfig};

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optimizer::{Contrast, OptimizationProblem, OptimizationReport};
use crate::phase_qubit::{target_choi, FitSample, PhaseQubitModel, QubitModelFits, READOUT};
use crate::pulse::{ControlPulse, PulseShape};
use artifacts::{write_fit_csv, write_json, write_population_csv, write_pulse_csv};

pub const MODEL_FIT_FILE: &str = "model_fit.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFitArtifact {
    pub config_hash: String,
    pub model_hash: String,
    pub phi_ref_over_2pi: f64,
    pub omega_ref: f64,
    pub validity_limit_over_2pi: f64,
    pub fit_range_over_2pi: (f64, f64),
    pub fits: QubitModelFits,
    pub samples: Vec<FitSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeArtifact {
    pub config_hash: String,
    pub pulse: ResolvedPulse,
    pub shape: PulseShape,
    pub report: OptimizationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationArtifact {
    pub config_hash: String,
    pub pulse_file: PathBuf,
    pub fidelity: f64,
    pub xi: f64,
    pub p_bright: f64,
    pub p_dark: f64,
}

fn prepare_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    Ok(dir)
}

/// Reads the cached fit if it was made from the same model section.
fn cached_fit(dir: &Path, model_hash: &str) -> Option<ModelFitArtifact> {
    let text = fs::read_to_string(dir.join(MODEL_FIT_FILE)).ok()?;
    let art: ModelFitArtifact = serde_json::from_str(&text).ok()?;
    (art.model_hash == model_hash).then_some(art)
}

/// Fits (or reuses) the model and writes `model_fit.json` and `fit_data.csv`.
pub fn fit(cfg: &RunConfig) -> Result<ModelFitArtifact> {
    let dir = prepare_dir(cfg)?;
    let model_hash = cfg.model_hash();
    let (fits, samples) = match cached_fit(dir, &model_hash) {
        Some(art) => (art.fits, art.samples),
        None => cfg.model.fit()?,
    };
    let art = ModelFitArtifact {
        config_hash: cfg.hash(),
        model_hash,
        phi_ref_over_2pi: fits.phi_ref / TAU,
        omega_ref: fits.omega_ref,
        validity_limit_over_2pi: fits.validity_limit / TAU,
        fit_range_over_2pi: (fits.fit_range.0 / TAU, fits.fit_range.1 / TAU),
        fits,
        samples,
    };
    write_json(&dir.join(MODEL_FIT_FILE), &art)?;
    write_fit_csv(&dir.join("fit_data.csv"), &art.config_hash, &art.fits, &art.samples)?;
    Ok(art)
}

fn problem(cfg: &RunConfig, fits: QubitModelFits) -> Result<OptimizationProblem<PhaseQubitModel>> {
    let shape = cfg.pulse.shape(&fits)?;
    let model = cfg.model.model(fits)?;
    OptimizationProblem::new(model, target_choi(), shape, cfg.optimizer.clone(), Some(READOUT))
}

fn initial_pulse(cfg: &RunConfig, shape: &PulseShape) -> ControlPulse {
    shape.square_pulse(cfg.pulse.resolve().initial_amplitude_over_2pi * TAU)
}

/// Optimizes the readout pulse and writes the report, pulses and population traces.
pub fn optimize(cfg: &RunConfig) -> Result<OptimizeArtifact> {
    let fit_art = fit(cfg)?;
    let dir = prepare_dir(cfg)?;
    let hash = cfg.hash();
    let problem = problem(cfg, fit_art.fits)?;
    let init = initial_pulse(cfg, &problem.shape);
    let report = problem.maximize(&init)?;

    let states = [READOUT.dark, READOUT.bright];
    let shape = &problem.shape;
    write_pulse_csv(&dir.join("initial_pulse.csv"), &hash, shape, &init.raw_pixels, &init.smoothed())?;
    write_pulse_csv(&dir.join("pulse.csv"), &hash, shape, &report.final_raw, &report.final_smoothed)?;
    write_population_csv(
        &dir.join("initial_populations.csv"),
        &hash,
        &problem.populations(&init.raw_pixels, &states)?,
    )?;
    write_population_csv(&dir.join("populations.csv"), &hash, &report.populations)?;

    let art = OptimizeArtifact {
        config_hash: hash,
        pulse: cfg.pulse.resolve(),
        shape: shape.clone(),
        report,
    };
    write_json(&dir.join("report.json"), &art)?;
    Ok(art)
}

/// Replays a pulse CSV through the configured model.
pub fn simulate(cfg: &RunConfig, pulse_file: &Path) -> Result<SimulationArtifact> {
    let fit_art = fit(cfg)?;
    let dir = prepare_dir(cfg)?;
    let hash = cfg.hash();
    let problem = problem(cfg, fit_art.fits)?;
    let raw = artifacts::read_pulse_csv(pulse_file, &problem.shape)?;
    let fidelity = problem.fidelity(&raw)?;
    let Contrast { xi, p_bright, p_dark } = problem
        .contrast(&raw)?
        .ok_or_else(|| Error::Numeric("readout contrast unavailable".into()))?;
    write_population_csv(
        &dir.join("simulated_populations.csv"),
        &hash,
        &problem.populations(&raw, &[READOUT.dark, READOUT.bright])?,
    )?;
    let art = SimulationArtifact {
        config_hash: hash,
        pulse_file: pulse_file.to_path_buf(),
        fidelity,
        xi,
        p_bright,
        p_dark,
    };
    write_json(&dir.join("simulation.json"), &art)?;
    Ok(art)
}
