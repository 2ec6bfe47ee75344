//! Choi-matrix GRAPE: fidelity and exact gradient over pulse pixels, and the
//! quasi-Newton ascent driving it.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bfgs::{self, BfgsSettings, Termination};
use crate::channel::{fidelity_gradient_term, frobenius_fidelity, reshuffle, ChoiMatrix};
use crate::error::{Error, Result};
use crate::liouville::{
    evolve, expm, expm_directional_derivative, CMatrix, DensityVector, Generator, Propagator,
};
use crate::pulse::{ControlPulse, PulseShape};

/// A drift generator plus a bias-dependent control generator `S_c(u)`.
pub trait ControlModel: Sync {
    fn dim(&self) -> usize;
    fn drift(&self) -> &Generator;
    /// `S_c(u)` and `dS_c/du`.
    fn control(&self, u: f64) -> Result<(Generator, Generator)>;

    /// Full generator `S_d + S_c(u)` and its derivative.
    fn generator(&self, u: f64) -> Result<(Generator, Generator)> {
        let (c, dc) = self.control(u)?;
        Ok((self.drift() + &c, dc))
    }
}

impl<M: ControlModel + ?Sized> ControlModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn drift(&self) -> &Generator {
        (**self).drift()
    }
    fn control(&self, u: f64) -> Result<(Generator, Generator)> {
        (**self).control(u)
    }
}

/// Which basis states define the contrast `ξ = P_bright (1 - P_dark)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Readout {
    pub bright: usize,
    pub dark: usize,
    /// Level whose final population counts as a click.
    pub pointer: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub xi: f64,
    pub p_bright: f64,
    pub p_dark: f64,
}

impl Readout {
    pub fn contrast(&self, t: &Propagator) -> Result<Contrast> {
        let d = t.dim();
        if self.bright.max(self.dark).max(self.pointer) >= d {
            return Err(Error::Dimension(format!(
                "readout levels {self:?} do not fit a {d}-level propagator"
            )));
        }
        let click = |k: usize| -> Result<f64> {
            Ok(evolve(t, &DensityVector::basis_state(d, k))?.populations()[self.pointer])
        };
        let p_bright = click(self.bright)?;
        let p_dark = click(self.dark)?;
        Ok(Contrast {
            xi: p_bright * (1.0 - p_dark),
            p_bright,
            p_dark,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    /// Per-pixel work on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let b = BfgsSettings::default();
        Self {
            max_iterations: b.max_iterations,
            gradient_tolerance: b.gradient_tolerance,
            c1: b.c1,
            c2: b.c2,
            parallel: false,
        }
    }
}

impl OptimizerSettings {
    pub fn bfgs(&self) -> BfgsSettings {
        BfgsSettings {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            c1: self.c1,
            c2: self.c2,
            ..BfgsSettings::default()
        }
    }
}

/// Populations after each pixel (row 0 is the initial state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTrace {
    pub init_state: usize,
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    /// Φ' at the start and after every accepted step.
    pub fidelity_history: Vec<f64>,
    pub initial_fidelity: f64,
    pub final_fidelity: f64,
    pub initial_contrast: Option<Contrast>,
    pub final_contrast: Option<Contrast>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub final_raw: Vec<f64>,
    pub final_smoothed: Vec<f64>,
    pub populations: Vec<PopulationTrace>,
}

pub struct OptimizationProblem<M> {
    pub model: M,
    pub target: ChoiMatrix,
    pub shape: PulseShape,
    pub settings: OptimizerSettings,
    pub readout: Option<Readout>,
}

struct PixelData {
    exp: CMatrix,
    deriv: CMatrix,
}

fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m.map(|z| z * Complex64::new(s, 0.0))
}

impl<M: ControlModel> OptimizationProblem<M> {
    pub fn new(
        model: M,
        target: ChoiMatrix,
        shape: PulseShape,
        settings: OptimizerSettings,
        readout: Option<Readout>,
    ) -> Result<Self> {
        shape.validate()?;
        if target.dim() != model.dim() {
            return Err(Error::Dimension(format!(
                "target acts on {} levels, model has {}",
                target.dim(),
                model.dim()
            )));
        }
        Ok(Self {
            model,
            target,
            shape,
            settings,
            readout,
        })
    }

    fn map_pixels<T: Send>(&self, n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        if self.settings.parallel {
            (0..n).into_par_iter().map(f).collect()
        } else {
            (0..n).map(f).collect()
        }
    }

    /// Propagator for already-smoothed pixels.
    pub fn propagator(&self, physical: &[f64]) -> Result<Propagator> {
        let dt = self.shape.dt;
        let exps = self.map_pixels(physical.len(), |j| {
            let (s, _) = self.model.generator(physical[j])?;
            expm(&scaled(s.matrix(), dt))
        })?;
        let n = self.model.dim().pow(2);
        let total = exps.into_iter().fold(CMatrix::identity(n, n), |acc, e| e * acc);
        Propagator::new(total, dt * physical.len() as f64)
    }

    /// Φ' and its gradient with respect to the smoothed pixels.
    pub fn evaluate_physical(&self, physical: &[f64]) -> Result<(f64, Vec<f64>)> {
        let dt = self.shape.dt;
        let n_pix = physical.len();
        if n_pix == 0 {
            return Err(Error::Argument("pulse has no pixels".into()));
        }
        let pixels = self.map_pixels(n_pix, |j| {
            let (s, ds) = self.model.generator(physical[j])?;
            let (exp, deriv) = expm_directional_derivative(&scaled(s.matrix(), dt), &scaled(ds.matrix(), dt))?;
            Ok(PixelData { exp, deriv })
        })?;

        // forward[j] = E_{j-1} ... E_0, backward[j] = E_{N-1} ... E_{j+1}
        let n = self.model.dim().pow(2);
        let mut forward = Vec::with_capacity(n_pix);
        let mut acc = CMatrix::identity(n, n);
        for p in &pixels {
            forward.push(acc.clone());
            acc = &p.exp * &acc;
        }
        let total = Propagator::new(acc, dt * n_pix as f64)?;
        let mut backward = vec![CMatrix::identity(n, n); n_pix];
        for j in (0..n_pix.saturating_sub(1)).rev() {
            backward[j] = &backward[j + 1] * &pixels[j + 1].exp;
        }

        let fidelity = frobenius_fidelity(&self.target, &reshuffle(&total))?.value();
        let grad = self.map_pixels(n_pix, |j| {
            let dt_prop = Propagator::new(&backward[j] * &pixels[j].deriv * &forward[j], 0.0)?;
            fidelity_gradient_term(&self.target, &reshuffle(&dt_prop))
        })?;
        Ok((fidelity, grad))
    }

    /// Φ' and its gradient with respect to all raw (pre-smoothing) pixels.
    pub fn objective_and_gradient(&self, raw: &[f64]) -> Result<(f64, Vec<f64>)> {
        if raw.len() != self.shape.n_pixels {
            return Err(Error::Argument(format!(
                "expected {} raw pixels, got {}",
                self.shape.n_pixels,
                raw.len()
            )));
        }
        let physical = self.shape.physical(raw);
        let (f, g_phys) = self.evaluate_physical(&physical)?;
        let j = self.shape.jacobian();
        let g_raw = j.transpose() * DVector::from_vec(g_phys);
        Ok((f, g_raw.iter().copied().collect()))
    }

    pub fn fidelity(&self, raw: &[f64]) -> Result<f64> {
        let t = self.propagator(&self.shape.physical(raw))?;
        Ok(frobenius_fidelity(&self.target, &reshuffle(&t))?.value())
    }

    pub fn contrast(&self, raw: &[f64]) -> Result<Option<Contrast>> {
        match &self.readout {
            None => Ok(None),
            Some(r) => Ok(Some(r.contrast(&self.propagator(&self.shape.physical(raw))?)?)),
        }
    }

    /// Population traces for each listed initial basis state.
    pub fn populations(&self, raw: &[f64], initial: &[usize]) -> Result<Vec<PopulationTrace>> {
        let physical = self.shape.physical(raw);
        let d = self.model.dim();
        let dt = self.shape.dt;
        let props = self.map_pixels(physical.len(), |j| {
            let (s, _) = self.model.generator(physical[j])?;
            Propagator::new(expm(&scaled(s.matrix(), dt))?, dt)
        })?;
        initial
            .iter()
            .map(|&k| {
                if k >= d {
                    return Err(Error::Dimension(format!("initial state {k} out of range for d = {d}")));
                }
                let mut rho = DensityVector::basis_state(d, k);
                let mut times = vec![0.0];
                let mut populations = vec![rho.populations()];
                for (j, p) in props.iter().enumerate() {
                    rho = evolve(p, &rho)?;
                    times.push((j + 1) as f64 * dt);
                    populations.push(rho.populations());
                }
                Ok(PopulationTrace {
                    init_state: k,
                    times,
                    populations,
                })
            })
            .collect()
    }

    /// BFGS ascent on Φ' over the sigmoid-transformed free pixels.
    pub fn maximize(&self, initial: &ControlPulse) -> Result<OptimizationReport> {
        if initial.shape != self.shape {
            return Err(Error::Argument("initial pulse was built on a different pulse shape".into()));
        }
        let x0 = DVector::from_vec(self.shape.free_from_raw(&initial.raw_pixels)?);
        let head = self.shape.fixed_head;
        let outcome = bfgs::minimize(x0, &self.settings.bfgs(), |x| {
            let (raw, slope) = self.shape.raw_from_free(x.as_slice());
            let (f, g_raw) = self.objective_and_gradient(&raw)?;
            let g = DVector::from_iterator(slope.len(), slope.iter().enumerate().map(|(k, s)| -g_raw[head + k] * s));
            Ok((-f, g))
        })?;
        let (final_raw, _) = self.shape.raw_from_free(outcome.x.as_slice());
        let fidelity_history: Vec<f64> = outcome.history.iter().map(|v| -v).collect();
        let init_states = match &self.readout {
            Some(r) => vec![r.dark, r.bright],
            None => (0..self.model.dim()).collect(),
        };
        Ok(OptimizationReport {
            initial_fidelity: fidelity_history[0],
            final_fidelity: *fidelity_history.last().unwrap(),
            fidelity_history,
            initial_contrast: self.contrast(&initial.raw_pixels)?,
            final_contrast: self.contrast(&final_raw)?,
            iterations: outcome.iterations,
            evaluations: outcome.evaluations,
            termination: outcome.termination,
            final_smoothed: self.shape.physical(&final_raw),
            populations: self.populations(&final_raw, &init_states)?,
            final_raw,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{build_generator, pixel_propagator, HamiltonianMatrix};

    /// Two-level toy: `H = u σ_x`, plus fixed damping.
    struct Toy {
        drift: Generator,
    }

    impl Toy {
        fn new() -> Self {
            let mut l = CMatrix::zeros(2, 2);
            l[(0, 1)] = Complex64::new(1.0, 0.0);
            let ch = crate::liouville::DecayChannel::new(l, 0.05).unwrap();
            Self {
                drift: build_generator(&HamiltonianMatrix::zeros(2), &[ch]).unwrap(),
            }
        }
    }

    fn sigma_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| Complex64::new(v, 0.0)))
    }

    impl ControlModel for Toy {
        fn dim(&self) -> usize {
            2
        }
        fn drift(&self) -> &Generator {
            &self.drift
        }
        fn control(&self, u: f64) -> Result<(Generator, Generator)> {
            let h = HamiltonianMatrix::new(scaled(&sigma_x(), u))?;
            let dh = HamiltonianMatrix::new(sigma_x())?;
            Ok((build_generator(&h, &[])?, build_generator(&dh, &[])?))
        }
    }

    fn shape(n: usize) -> PulseShape {
        PulseShape {
            n_pixels: n,
            dt: 0.1,
            fixed_head: 0,
            fixed_tail: 0,
            lower: -3.0,
            upper: 3.0,
            reference: 0.0,
            kernel_sigma: 0.0,
        }
    }

    fn not_gate_target() -> ChoiMatrix {
        let s = build_generator(&HamiltonianMatrix::new(scaled(&sigma_x(), 1.0)).unwrap(), &[]).unwrap();
        reshuffle(&pixel_propagator(&s, std::f64::consts::FRAC_PI_2).unwrap())
    }

    #[test]
    fn single_pixel_without_control_is_plain_drift() {
        let toy = Toy::new();
        let p = OptimizationProblem::new(&toy, not_gate_target(), shape(1), Default::default(), None).unwrap();
        let (f, _) = p.objective_and_gradient(&[0.0]).unwrap();
        let want = frobenius_fidelity(&p.target, &reshuffle(&pixel_propagator(toy.drift(), 0.1).unwrap()))
            .unwrap()
            .value();
        assert!((f - want).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let toy = Toy::new();
        let mut sh = shape(12);
        sh.kernel_sigma = 0.15;
        let p = OptimizationProblem::new(&toy, not_gate_target(), sh, Default::default(), None).unwrap();
        let raw: Vec<f64> = (0..12).map(|k| 0.8 + 0.3 * (k as f64).sin()).collect();
        let (_, g) = p.objective_and_gradient(&raw).unwrap();
        let h = 1e-6;
        for k in 0..12 {
            let mut a = raw.clone();
            let mut b = raw.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (p.fidelity(&a).unwrap() - p.fidelity(&b).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "pixel {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn parallel_matches_serial_bitwise() {
        let toy = Toy::new();
        let raw: Vec<f64> = (0..20).map(|k| 0.1 * k as f64 - 0.7).collect();
        let serial = OptimizationProblem::new(&toy, not_gate_target(), shape(20), Default::default(), None).unwrap();
        let par = OptimizationProblem {
            settings: OptimizerSettings {
                parallel: true,
                ..Default::default()
            },
            ..OptimizationProblem::new(&toy, not_gate_target(), shape(20), Default::default(), None).unwrap()
        };
        assert_eq!(
            serial.objective_and_gradient(&raw).unwrap(),
            par.objective_and_gradient(&raw).unwrap()
        );
    }

    #[test]
    fn ascent_improves_and_history_is_monotone() {
        let toy = Toy::new();
        let p = OptimizationProblem::new(&toy, not_gate_target(), shape(16), Default::default(), None).unwrap();
        let init = p.shape.square_pulse(0.3);
        let report = p.maximize(&init).unwrap();
        assert!(report.final_fidelity > report.initial_fidelity);
        assert!(report.final_fidelity > 0.9);
        assert!(report.fidelity_history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(report.populations.len(), 2);
        assert_eq!(report.populations[0].populations.len(), 17);
    }

    struct Frozen(Generator);

    impl ControlModel for Frozen {
        fn dim(&self) -> usize {
            2
        }
        fn drift(&self) -> &Generator {
            &self.0
        }
        fn control(&self, _: f64) -> Result<(Generator, Generator)> {
            Ok((Generator::zeros(2), Generator::zeros(2)))
        }
    }

    #[test]
    fn optimal_start_returns_immediately() {
        let toy = Toy::new();
        let frozen = Frozen(toy.drift.clone());
        let target = reshuffle(&pixel_propagator(&toy.drift, 0.4).unwrap());
        let p = OptimizationProblem::new(frozen, target, shape(4), Default::default(), None).unwrap();
        let report = p.maximize(&p.shape.square_pulse(0.5)).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(report.termination, Termination::GradientTolerance);
        assert!((report.final_fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn readout_of_identity() {
        let r = Readout {
            bright: 1,
            dark: 0,
            pointer: 2,
        };
        let c = r.contrast(&Propagator::identity(3)).unwrap();
        assert_eq!((c.xi, c.p_bright, c.p_dark), (0.0, 0.0, 0.0));
        assert!(r.contrast(&Propagator::identity(2)).is_err());
    }
}
