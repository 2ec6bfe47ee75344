use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optimizer::OptimizerSettings;
use crate::phase_qubit::{ModelConfig, QubitModelFits};
use crate::pulse::PulseShape;

/// Measurement-pulse settings. Biases are in units of 2π; unset values fall
/// back to duration-dependent presets or to the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSettings {
    pub duration_ns: f64,
    pub dt_ns: Option<f64>,
    pub kernel_sigma_ns: Option<f64>,
    /// Held duration at the reference bias at each end.
    pub fixed_edge_ns: Option<f64>,
    pub initial_amplitude_over_2pi: Option<f64>,
    /// Defaults to the reference bias.
    pub lower_over_2pi: Option<f64>,
    /// Defaults to the validity limit of the fitted model.
    pub upper_over_2pi: Option<f64>,
}

impl Default for PulseSettings {
    fn default() -> Self {
        Self {
            duration_ns: 10.0,
            dt_ns: None,
            kernel_sigma_ns: None,
            fixed_edge_ns: None,
            initial_amplitude_over_2pi: None,
            lower_over_2pi: None,
            upper_over_2pi: None,
        }
    }
}

/// Pulse settings with every preset filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPulse {
    pub duration_ns: f64,
    pub dt_ns: f64,
    pub kernel_sigma_ns: f64,
    pub fixed_edge_ns: f64,
    pub initial_amplitude_over_2pi: f64,
}

impl PulseSettings {
    /// Presets by duration: (dt, sigma, held edge, initial amplitude).
    fn preset(&self) -> (f64, f64, f64, f64) {
        let t = self.duration_ns;
        if t < 2.0 {
            (0.02, 0.02, 0.06, 0.942)
        } else if t < 10.0 {
            (0.05, 0.25, 1.0, 0.9387)
        } else {
            (0.1, 0.5, 2.0, 0.9387)
        }
    }

    pub fn resolve(&self) -> ResolvedPulse {
        let (dt, sigma, edge, amp) = self.preset();
        ResolvedPulse {
            duration_ns: self.duration_ns,
            dt_ns: self.dt_ns.unwrap_or(dt),
            kernel_sigma_ns: self.kernel_sigma_ns.unwrap_or(sigma),
            fixed_edge_ns: self.fixed_edge_ns.unwrap_or(edge),
            initial_amplitude_over_2pi: self.initial_amplitude_over_2pi.unwrap_or(amp),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.resolve();
        if !(r.duration_ns > 0.0) || !(r.dt_ns > 0.0) {
            return Err(Error::Config("pulse duration and dt_ns must be positive".into()));
        }
        let n = r.duration_ns / r.dt_ns;
        if (n - n.round()).abs() > 1e-6 || n.round() < 1.0 {
            return Err(Error::Config(format!(
                "duration {} ns is not a whole number of {} ns pixels",
                r.duration_ns, r.dt_ns
            )));
        }
        if r.kernel_sigma_ns < 0.0 || r.fixed_edge_ns < 0.0 {
            return Err(Error::Config("kernel_sigma_ns and fixed_edge_ns must be >= 0".into()));
        }
        Ok(())
    }

    /// Pixel grid and bounds on top of a fitted model.
    pub fn shape(&self, fits: &QubitModelFits) -> Result<PulseShape> {
        self.validate()?;
        let r = self.resolve();
        let n_pixels = (r.duration_ns / r.dt_ns).round() as usize;
        let edge = (r.fixed_edge_ns / r.dt_ns).round() as usize;
        let lower = self.lower_over_2pi.map_or(fits.phi_ref, |f| f * TAU);
        let upper = self.upper_over_2pi.map_or(fits.validity_limit, |f| f * TAU);
        if upper > fits.validity_limit {
            return Err(Error::Config(format!(
                "upper bound {:.6} exceeds the three-level validity limit {:.6} (units of 2pi)",
                upper / TAU,
                fits.validity_limit / TAU
            )));
        }
        let shape = PulseShape {
            n_pixels,
            dt: r.dt_ns,
            fixed_head: edge,
            fixed_tail: edge,
            lower,
            upper,
            reference: fits.phi_ref,
            kernel_sigma: r.kernel_sigma_ns,
        };
        shape.validate().map_err(|e| Error::Config(e.to_string()))?;
        let amp = r.initial_amplitude_over_2pi * TAU;
        if !(amp > lower && amp < upper) {
            return Err(Error::Config(format!(
                "initial amplitude {} must lie strictly between the bounds [{:.6}, {:.6}] (units of 2pi)",
                r.initial_amplitude_over_2pi,
                lower / TAU,
                upper / TAU
            )));
        }
        Ok(shape)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub pulse: PulseSettings,
    pub optimizer: OptimizerSettings,
    pub output_dir: PathBuf,
    /// Reserved; the pipeline is deterministic.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            pulse: PulseSettings::default(),
            optimizer: OptimizerSettings::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.pulse.validate()?;
        self.optimizer.bfgs().validate()?;
        Ok(())
    }

    /// Provenance hash of everything that affects results (not the output location).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    /// Hash of the model section alone; keys the model-fit cache.
    pub fn model_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.model).expect("config serializes"))
    }
}
