//! CSV and JSON artifacts. Every file starts with (or contains) the config hash.

use serde::Serialize;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optimizer::PopulationTrace;
use crate::phase_qubit::{FitSample, QubitModelFits};
use crate::pulse::PulseShape;

pub const PULSE_HEADER: [&str; 3] = ["t_ns", "phi_b_raw", "phi_b_smoothed"];
pub const POPULATION_HEADER: [&str; 5] = ["t_ns", "init_state", "p0", "p1", "pm"];

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_csv(path: &Path, hash: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut buf = format!("# config_hash={hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Pulse in units of 2π, one row per pixel start time.
pub fn write_pulse_csv(path: &Path, hash: &str, shape: &PulseShape, raw: &[f64], smoothed: &[f64]) -> Result<()> {
    let rows = (0..shape.n_pixels).map(|k| {
        vec![
            (k as f64 * shape.dt).to_string(),
            (raw[k] / TAU).to_string(),
            (smoothed[k] / TAU).to_string(),
        ]
    });
    write_csv(path, hash, &PULSE_HEADER, rows)
}

/// Raw pixels (rad) from a pulse CSV, checked against the pixel grid of `shape`.
pub fn read_pulse_csv(path: &Path, shape: &PulseShape) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Argument(format!("cannot read pulse {}: {e}", path.display())))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Argument(format!("pulse CSV: {e}")))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Argument(format!("pulse CSV lacks a {name} column")))
    };
    let (t_col, raw_col) = (col("t_ns")?, col("phi_b_raw")?);
    let mut raw = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Argument(format!("pulse CSV: {e}")))?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Argument(format!("pulse CSV row {}: bad number", k + 1)))
        };
        let t = num(t_col)?;
        if (t - k as f64 * shape.dt).abs() > 1e-9 * shape.duration().max(1.0) {
            return Err(Error::Argument(format!(
                "pulse CSV row {} at t = {t} ns is off the {} ns pixel grid",
                k + 1,
                shape.dt
            )));
        }
        raw.push(num(raw_col)? * TAU);
    }
    if raw.len() != shape.n_pixels {
        return Err(Error::Argument(format!(
            "pulse CSV has {} pixels, the configured grid has {}",
            raw.len(),
            shape.n_pixels
        )));
    }
    let tol = 1e-12 * TAU;
    if let Some(u) = raw.iter().find(|u| **u < shape.lower - tol || **u > shape.upper + tol) {
        return Err(Error::Argument(format!(
            "pulse value {:.6} lies outside the bounds [{:.6}, {:.6}] (units of 2pi)",
            u / TAU,
            shape.lower / TAU,
            shape.upper / TAU
        )));
    }
    Ok(raw.into_iter().map(|u| u.clamp(shape.lower, shape.upper)).collect())
}

pub fn write_population_csv(path: &Path, hash: &str, traces: &[PopulationTrace]) -> Result<()> {
    let rows = traces.iter().flat_map(|tr| {
        tr.times.iter().zip(&tr.populations).map(move |(t, p)| {
            vec![
                t.to_string(),
                tr.init_state.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
            ]
        })
    });
    write_csv(path, hash, &POPULATION_HEADER, rows)
}

/// DVR data beside the fitted curves; biases in units of 2π, frequencies in rad/ns.
pub fn write_fit_csv(path: &Path, hash: &str, fits: &QubitModelFits, samples: &[FitSample]) -> Result<()> {
    let header = [
        "phi_b_over_2pi",
        "eta_dvr",
        "eta_fit",
        "alpha",
        "alpha_fit",
        "omega_dvr",
        "omega_fit",
        "omega_harmonic",
        "n_well_states",
    ];
    let rows = samples.iter().map(|s| {
        vec![
            (s.phi_b / TAU).to_string(),
            s.eta.to_string(),
            fits.eta.eval(s.phi_b).to_string(),
            s.alpha.to_string(),
            fits.alpha.eval(s.phi_b).to_string(),
            s.omega_dvr.to_string(),
            fits.omega.eval(s.phi_b).to_string(),
            s.omega_harmonic.to_string(),
            s.n_well_states.to_string(),
        ]
    });
    write_csv(path, hash, &header, rows)
}
