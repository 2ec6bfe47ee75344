//! Analytic fits of η, α and ω over the bias range, with first derivatives.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::dvr::{dvr_solve, eta_overlap, DvrGrid};
use super::params::QubitParams;
use super::potential::bisect;
use crate::error::{Error, Result};

fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numeric(format!("least-squares solve failed: {e}")))
}

/// `p(x) = Σ_k coeffs[k] (x - origin)^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub origin: f64,
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        let t = x - self.origin;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let t = x - self.origin;
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c)
    }
}

/// Least-squares polynomial of `degree` about `origin`. `weights` scale each residual.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize, origin: f64, weights: Option<&[f64]>) -> Result<Polynomial> {
    if xs.len() != ys.len() || xs.len() <= degree {
        return Err(Error::Argument(format!(
            "degree-{degree} fit needs more than {degree} points, got {} x and {} y",
            xs.len(),
            ys.len()
        )));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, k| w(i) * (xs[i] - origin).powi(k as i32));
    let b = DVector::from_fn(xs.len(), |i, _| w(i) * ys[i]);
    Ok(Polynomial {
        origin,
        coeffs: least_squares(a, b)?.iter().copied().collect(),
    })
}

/// `η = 1 + a2 d^2 + a3 d^3` with `d = φ_b - origin`, so `η(origin) = 1` and `η'(origin) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaFit {
    pub origin: f64,
    pub a2: f64,
    pub a3: f64,
}

impl EtaFit {
    pub fn fit(xs: &[f64], eta: &[f64], origin: f64) -> Result<Self> {
        let a = DMatrix::from_fn(xs.len(), 2, |i, k| (xs[i] - origin).powi(k as i32 + 2));
        let b = DVector::from_fn(xs.len(), |i, _| eta[i] - 1.0);
        let c = least_squares(a, b)?;
        Ok(Self {
            origin,
            a2: c[0],
            a3: c[1],
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.origin;
        1.0 + d * d * (self.a2 + self.a3 * d)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let d = x - self.origin;
        d * (2.0 * self.a2 + 3.0 * self.a3 * d)
    }

    /// `s = sqrt(1 - η^2)` and `ds/dφ_b`, written as `|d| sqrt(q)` so both stay
    /// analytic on either side of the origin. At the origin the slope is the
    /// right-hand one.
    pub fn mixing(&self, x: f64) -> (f64, f64) {
        let d = x - self.origin;
        let u = self.a2 + self.a3 * d;
        let w = 2.0 + d * d * u;
        let q = -u * w;
        if q <= 0.0 {
            return (0.0, 0.0);
        }
        let dq = -self.a3 * w - u * (2.0 * self.a2 * d + 3.0 * self.a3 * d * d);
        let sq = q.sqrt();
        let sign = if d >= 0.0 { 1.0 } else { -1.0 };
        (d.abs() * sq, sign * sq + d.abs() * dq / (2.0 * sq))
    }
}

/// `a (b + c φ)^d + e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl PowerLawFit {
    fn from_slice(p: &[f64]) -> Self {
        Self {
            a: p[0],
            b: p[1],
            c: p[2],
            d: p[3],
            e: p[4],
        }
    }

    fn to_vec(&self) -> Vec<f64> {
        vec![self.a, self.b, self.c, self.d, self.e]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.a * (self.b + self.c * x).powf(self.d) + self.e
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.a * self.d * self.c * (self.b + self.c * x).powf(self.d - 1.0)
    }

    fn gradient(&self, x: f64) -> [f64; 5] {
        let base = self.b + self.c * x;
        let pw = base.powf(self.d);
        let dbase = self.a * self.d * base.powf(self.d - 1.0);
        [pw, dbase, dbase * x, self.a * pw * base.ln(), 1.0]
    }

    /// Relative-residual Levenberg–Marquardt fit, started from the best point of
    /// a `(b, d)` grid with `c = -1` and `(a, e)` solved linearly.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let x_hi = xs.iter().copied().fold(f64::MIN, f64::max);
        let mut starts = Vec::new();
        for kb in 0..40 {
            let b = x_hi + 1e-3 * 1.2f64.powi(kb);
            for d in [-2.0, -1.0, -0.5, -0.25, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0] {
                let a = DMatrix::from_fn(xs.len(), 2, |i, k| {
                    let basis = if k == 0 { (b - xs[i]).powf(d) } else { 1.0 };
                    basis / ys[i]
                });
                let rhs = DVector::from_element(xs.len(), 1.0);
                if let Ok(sol) = least_squares(a, rhs) {
                    let cand = Self {
                        a: sol[0],
                        b,
                        c: -1.0,
                        d,
                        e: sol[1],
                    };
                    starts.push((relative_cost(&cand, xs, ys), cand));
                }
            }
        }
        starts.retain(|(c, _)| c.is_finite());
        starts.sort_by(|l, r| l.0.total_cmp(&r.0));
        starts
            .into_iter()
            .take(5)
            .map(|(_, s)| levenberg_marquardt(s, xs, ys))
            .min_by(|l, r| relative_cost(l, xs, ys).total_cmp(&relative_cost(r, xs, ys)))
            .ok_or_else(|| Error::Numeric("no admissible starting point for the power-law fit".into()))
    }
}

fn relative_cost(f: &PowerLawFit, xs: &[f64], ys: &[f64]) -> f64 {
    let c: f64 = xs.iter().zip(ys).map(|(x, y)| ((f.eval(*x) - y) / y).powi(2)).sum();
    if c.is_finite() && xs.iter().all(|x| f.b + f.c * x > 0.0) {
        c
    } else {
        f64::INFINITY
    }
}

fn levenberg_marquardt(start: PowerLawFit, xs: &[f64], ys: &[f64]) -> PowerLawFit {
    let mut p = start;
    let mut cost = relative_cost(&p, xs, ys);
    let mut lambda = 1e-3;
    for _ in 0..2000 {
        let jac = DMatrix::from_fn(xs.len(), 5, |i, k| p.gradient(xs[i])[k] / ys[i]);
        let r = DVector::from_fn(xs.len(), |i, _| (p.eval(xs[i]) - ys[i]) / ys[i]);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * r;
        let floor = 1e-12 * jtj.diagonal().max();
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..5 {
                a[(k, k)] += lambda * jtj[(k, k)].max(floor);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 4.0;
                continue;
            };
            let trial_vec: Vec<f64> = p.to_vec().iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial = PowerLawFit::from_slice(&trial_vec);
            let trial_cost = relative_cost(&trial, xs, ys);
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(1e-300);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    p
}

/// Bias grid and acceptance thresholds for the model fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub n_points: usize,
    /// Lower end of the fit range in units of 2π; the reference bias when absent.
    pub lower_over_2pi: Option<f64>,
    pub upper_over_2pi: f64,
    /// Max absolute error of the η fit.
    pub eta_tolerance: f64,
    /// Max relative error of the α fit.
    pub alpha_tolerance: f64,
    /// Max relative error of the ω fit.
    pub omega_tolerance: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            n_points: 40,
            lower_over_2pi: None,
            upper_over_2pi: 0.945,
            eta_tolerance: 1e-3,
            alpha_tolerance: 1e-3,
            omega_tolerance: 1e-2,
        }
    }
}

/// Raw data behind the fits at one bias (rad, rad/ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSample {
    pub phi_b: f64,
    pub eta: f64,
    pub alpha: f64,
    pub omega_dvr: f64,
    pub omega_harmonic: f64,
    pub n_well_states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitQualityReport {
    pub eta_max_abs_error: f64,
    pub alpha_max_rel_error: f64,
    pub omega_max_rel_error: f64,
    /// Deviation of the harmonic frequency from the DVR data.
    pub harmonic_max_rel_error: f64,
}

/// Fitted curves of the three-level model. Phases in rad, frequencies in rad/ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitModelFits {
    pub phi_ref: f64,
    pub omega_ref: f64,
    pub fit_range: (f64, f64),
    pub eta: EtaFit,
    pub alpha: Polynomial,
    pub omega: PowerLawFit,
    /// Bias where the fitted α reaches 9.
    pub validity_limit: f64,
    pub quality: FitQualityReport,
}

pub const ALPHA_THRESHOLD: f64 = 9.0;

/// Samples η, α and ω on the fit grid and fits the analytic curves.
pub fn fit_model_curves(
    params: &QubitParams,
    grid: &DvrGrid,
    settings: &FitSettings,
    phi_ref: f64,
) -> Result<(QubitModelFits, Vec<FitSample>)> {
    let lo = settings.lower_over_2pi.map_or(phi_ref, |f| f * TAU);
    let hi = settings.upper_over_2pi * TAU;
    if !(hi > lo) || settings.n_points < 6 {
        return Err(Error::Config(format!(
            "fit range [{:.5}, {:.5}]*2pi with {} points is unusable",
            lo / TAU,
            hi / TAU,
            settings.n_points
        )));
    }
    let reference = dvr_solve(phi_ref, params, grid)?;
    let omega_ref = reference.transition_frequency();
    let n = settings.n_points;
    let biases: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let samples: Vec<FitSample> = biases
        .par_iter()
        .map(|&phi_b| {
            let sol = dvr_solve(phi_b, params, grid)?;
            if sol.n_well_states < 2 {
                return Err(Error::Config(format!(
                    "fit bias {:.6}*2pi has fewer than two shallow-well states",
                    phi_b / TAU
                )));
            }
            Ok(FitSample {
                phi_b,
                eta: eta_overlap(&sol, &reference),
                alpha: sol.analysis.alpha,
                omega_dvr: sol.transition_frequency(),
                omega_harmonic: sol.analysis.omega_harmonic,
                n_well_states: sol.n_well_states,
            })
        })
        .collect::<Result<_>>()?;

    let xs: Vec<f64> = samples.iter().map(|s| s.phi_b).collect();
    let col = |f: fn(&FitSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    let (eta, alpha, omega, omega_h) = (
        col(|s| s.eta),
        col(|s| s.alpha),
        col(|s| s.omega_dvr),
        col(|s| s.omega_harmonic),
    );

    let eta_fit = EtaFit::fit(&xs, &eta, phi_ref)?;
    let inv_alpha: Vec<f64> = alpha.iter().map(|a| 1.0 / a).collect();
    let alpha_fit = polyfit(&xs, &alpha, 2, phi_ref, Some(&inv_alpha))?;
    let omega_fit = PowerLawFit::fit(&xs, &omega)?;

    let max_over = |f: &dyn Fn(usize) -> f64| (0..n).map(f).fold(0.0, f64::max);
    let quality = FitQualityReport {
        eta_max_abs_error: max_over(&|i| (eta_fit.eval(xs[i]) - eta[i]).abs()),
        alpha_max_rel_error: max_over(&|i| ((alpha_fit.eval(xs[i]) - alpha[i]) / alpha[i]).abs()),
        omega_max_rel_error: max_over(&|i| ((omega_fit.eval(xs[i]) - omega[i]) / omega[i]).abs()),
        harmonic_max_rel_error: max_over(&|i| ((omega_h[i] - omega[i]) / omega[i]).abs()),
    };
    for (curve, error, threshold) in [
        ("eta", quality.eta_max_abs_error, settings.eta_tolerance),
        ("alpha", quality.alpha_max_rel_error, settings.alpha_tolerance),
        ("omega", quality.omega_max_rel_error, settings.omega_tolerance),
    ] {
        if !(error <= threshold) {
            return Err(Error::FitQuality { curve, error, threshold });
        }
    }

    let validity_limit = validity_limit(&alpha_fit, (lo, hi))?;
    Ok((
        QubitModelFits {
            phi_ref,
            omega_ref,
            fit_range: (lo, hi),
            eta: eta_fit,
            alpha: alpha_fit,
            omega: omega_fit,
            validity_limit,
            quality,
        },
        samples,
    ))
}

/// Bias in `range` where the fitted α equals 9.
pub fn validity_limit(alpha: &Polynomial, range: (f64, f64)) -> Result<f64> {
    let g = |x: f64| alpha.eval(x) - ALPHA_THRESHOLD;
    let (lo, hi) = range;
    if g(lo) * g(hi) > 0.0 {
        return Err(Error::Config(format!(
            "fitted alpha does not cross {ALPHA_THRESHOLD} on [{:.5}, {:.5}]*2pi",
            lo / TAU,
            hi / TAU
        )));
    }
    Ok(bisect(lo, hi, g))
}
