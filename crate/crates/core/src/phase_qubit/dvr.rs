//! Finite-interval (particle-in-a-box) DVR of `E_c N^2 + V(φ)` on the shallow well.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::params::QubitParams;
use super::potential::{find_well_extrema, potential, PotentialAnalysis};
use crate::error::{Error, Result};

/// Window and resolution of the shallow-well DVR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DvrGrid {
    /// Number of intervals; the grid has `n_intervals - 1` interior points.
    pub n_intervals: usize,
    /// Distance from the well minimum to the left hard wall, rad.
    pub left_extent: f64,
    /// Distance from the barrier top to the right hard wall, rad.
    pub right_margin: f64,
    /// Level shift on doubling the grid above which a solve is rejected, rad/ns.
    pub refinement_tolerance: f64,
}

impl Default for DvrGrid {
    fn default() -> Self {
        Self {
            n_intervals: 150,
            left_extent: 0.7,
            right_margin: 0.0,
            refinement_tolerance: 1e-8,
        }
    }
}

impl DvrGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_intervals < 8 {
            return Err(Error::Config("DVR needs at least 8 intervals".into()));
        }
        if !(self.left_extent > 0.0) || self.right_margin < 0.0 {
            return Err(Error::Config("DVR window extents must be positive".into()));
        }
        Ok(())
    }
}

/// Eigenstates on the interior points of `(a, b)`.
#[derive(Debug, Clone)]
pub struct IntervalSpectrum {
    pub a: f64,
    pub b: f64,
    pub n_intervals: usize,
    pub grid: Vec<f64>,
    /// Ascending.
    pub energies: Vec<f64>,
    /// Columns are unit eigenvectors (coefficients of the DVR functions).
    pub vectors: DMatrix<f64>,
}

impl IntervalSpectrum {
    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.n_intervals as f64
    }

    /// Wavefunction `k` sampled on the grid, normalized so `Σ ψ^2 Δ = 1`.
    pub fn wavefunction(&self, k: usize) -> Vec<f64> {
        let scale = 1.0 / self.spacing().sqrt();
        self.vectors.column(k).iter().map(|c| c * scale).collect()
    }

    /// Wavefunction `k` at arbitrary `x` through its sine-series expansion; zero outside `(a, b)`.
    pub fn evaluate(&self, k: usize, xs: &[f64]) -> Vec<f64> {
        let n = self.n_intervals;
        let l = self.b - self.a;
        let norm = (2.0 / l).sqrt();
        let sqrt_dx = self.spacing().sqrt();
        let c = self.vectors.column(k);
        let amps: Vec<f64> = (1..n)
            .map(|mode| {
                let s: f64 = self
                    .grid
                    .iter()
                    .zip(c.iter())
                    .map(|(x, ci)| ci * norm * (mode as f64 * PI * (x - self.a) / l).sin())
                    .sum();
                sqrt_dx * s
            })
            .collect();
        xs.iter()
            .map(|&x| {
                if x <= self.a || x >= self.b {
                    return 0.0;
                }
                amps.iter()
                    .enumerate()
                    .map(|(m, am)| am * norm * ((m + 1) as f64 * PI * (x - self.a) / l).sin())
                    .sum()
            })
            .collect()
    }
}

/// Colbert–Miller kinetic matrix for `-kinetic d^2/dx^2` on `n - 1` interior points of a length-`l` box.
fn kinetic_matrix(n: usize, l: f64, kinetic: f64) -> DMatrix<f64> {
    let pref = kinetic * PI * PI / (2.0 * l * l);
    let nf = n as f64;
    DMatrix::from_fn(n - 1, n - 1, |r, c| {
        let (i, j) = ((r + 1) as f64, (c + 1) as f64);
        if r == c {
            pref * ((2.0 * nf * nf + 1.0) / 3.0 - 1.0 / (PI * i / nf).sin().powi(2))
        } else {
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            pref * sign
                * (1.0 / (PI * (i - j) / (2.0 * nf)).sin().powi(2)
                    - 1.0 / (PI * (i + j) / (2.0 * nf)).sin().powi(2))
        }
    })
}

/// Spectrum of `-kinetic d^2/dx^2 + v(x)` with hard walls at `a` and `b`.
pub fn interval_dvr(a: f64, b: f64, n: usize, kinetic: f64, v: impl Fn(f64) -> f64) -> Result<IntervalSpectrum> {
    if !(b > a) || n < 2 {
        return Err(Error::Argument(format!("bad DVR interval ({a}, {b}) with {n} intervals")));
    }
    let l = b - a;
    let grid: Vec<f64> = (1..n).map(|i| a + i as f64 * l / n as f64).collect();
    let mut h = kinetic_matrix(n, l, kinetic);
    for (k, &x) in grid.iter().enumerate() {
        h[(k, k)] += v(x);
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(grid.len(), grid.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(IntervalSpectrum {
        a,
        b,
        n_intervals: n,
        grid,
        energies,
        vectors,
    })
}

/// Shallow-well spectrum at one bias. Energies are measured from `V_min`.
#[derive(Debug, Clone)]
pub struct DvrSolution {
    pub analysis: PotentialAnalysis,
    pub spectrum: IntervalSpectrum,
    pub n_well_states: usize,
}

impl DvrSolution {
    pub fn energies(&self) -> &[f64] {
        &self.spectrum.energies
    }

    pub fn transition_frequency(&self) -> f64 {
        self.spectrum.energies[1] - self.spectrum.energies[0]
    }

    /// Ground state on the grid, signed positive at the point nearest the minimum.
    pub fn ground_state(&self) -> Vec<f64> {
        let mut psi = self.spectrum.wavefunction(0);
        if psi[self.nearest_to_min()] < 0.0 {
            psi.iter_mut().for_each(|v| *v = -*v);
        }
        psi
    }

    fn nearest_to_min(&self) -> usize {
        let g = &self.spectrum.grid;
        (0..g.len())
            .min_by(|&p, &q| {
                (g[p] - self.analysis.phi_min)
                    .abs()
                    .total_cmp(&(g[q] - self.analysis.phi_min).abs())
            })
            .unwrap()
    }

    /// Ground state at arbitrary phases with the same sign convention.
    pub fn ground_state_at(&self, xs: &[f64]) -> Vec<f64> {
        let mut psi = self.spectrum.evaluate(0, xs);
        if self.spectrum.vectors[(self.nearest_to_min(), 0)] < 0.0 {
            psi.iter_mut().for_each(|v| *v = -*v);
        }
        psi
    }
}

fn solve_with(phi_b: f64, params: &QubitParams, grid: &DvrGrid, n: usize) -> Result<DvrSolution> {
    let analysis = find_well_extrema(phi_b, params)?;
    let a = analysis.phi_min - grid.left_extent;
    let b = analysis.phi_max + grid.right_margin;
    let v_min = analysis.v_min;
    let spectrum = interval_dvr(a, b, n, params.e_c(), |x| potential(x, phi_b, params) - v_min)?;

    let barrier = analysis.barrier();
    let dx = spectrum.spacing();
    let n_well_states = (0..spectrum.energies.len())
        .take_while(|&k| spectrum.energies[k] < barrier)
        .filter(|&k| {
            let mass: f64 = spectrum
                .grid
                .iter()
                .zip(spectrum.wavefunction(k))
                .filter(|(x, _)| **x <= analysis.phi_max)
                .map(|(_, psi)| psi * psi * dx)
                .sum();
            mass >= 0.5
        })
        .count();
    Ok(DvrSolution {
        analysis,
        spectrum,
        n_well_states,
    })
}

pub fn dvr_solve(phi_b: f64, params: &QubitParams, grid: &DvrGrid) -> Result<DvrSolution> {
    grid.validate()?;
    solve_with(phi_b, params, grid, grid.n_intervals)
}

/// As [`dvr_solve`], but rejects the grid if doubling it moves `E_0` or `E_1`
/// by more than the refinement tolerance.
pub fn dvr_solve_checked(phi_b: f64, params: &QubitParams, grid: &DvrGrid) -> Result<DvrSolution> {
    let coarse = dvr_solve(phi_b, params, grid)?;
    let fine = solve_with(phi_b, params, grid, 2 * grid.n_intervals)?;
    let change = (0..2)
        .map(|k| (coarse.energies()[k] - fine.energies()[k]).abs())
        .fold(0.0, f64::max);
    if change > grid.refinement_tolerance {
        return Err(Error::Resolution {
            change,
            tolerance: grid.refinement_tolerance,
        });
    }
    Ok(coarse)
}

/// Overlap of the ground state at `phi_b` with the reference ground state,
/// `η = ∫ ψ_0(φ, φ_b) ψ_0(φ, φ_ref) dφ` on the reference grid.
pub fn eta_overlap(solution: &DvrSolution, reference: &DvrSolution) -> f64 {
    let psi_ref = reference.ground_state();
    let psi_b = solution.ground_state_at(&reference.spectrum.grid);
    let dx = reference.spectrum.spacing();
    psi_b.iter().zip(&psi_ref).map(|(p, q)| p * q * dx).sum()
}
