//! Pulse parameterization: raw pixels, Gaussian smoothing and the bounded
//! change of variables the optimizer works in.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized Gaussian taps, truncated at 4 sigma. `sigma` and `dt` share units.
pub fn gaussian_kernel(sigma: f64, dt: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let s = sigma / dt;
    let half = (4.0 * s).ceil() as i64;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|k| (-0.5 * (k as f64 / s).powi(2)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Convolution with the Gaussian kernel, extending the edge values past both ends.
pub fn smooth(raw: &[f64], sigma: f64, dt: f64) -> Vec<f64> {
    let taps = gaussian_kernel(sigma, dt);
    let half = (taps.len() / 2) as i64;
    let n = raw.len() as i64;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, w)| {
                    let j = (i + k as i64 - half).clamp(0, n - 1);
                    w * raw[j as usize]
                })
                .sum()
        })
        .collect()
}

/// The constant matrix `J` with `smooth(x) = J x`.
pub fn smoothing_jacobian(n: usize, sigma: f64, dt: f64) -> DMatrix<f64> {
    let taps = gaussian_kernel(sigma, dt);
    let half = (taps.len() / 2) as i64;
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n as i64 {
        for (k, w) in taps.iter().enumerate() {
            let col = (i + k as i64 - half).clamp(0, n as i64 - 1);
            j[(i as usize, col as usize)] += w;
        }
    }
    j
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Geometry of a pulse: pixel grid, held edges, bounds and smoothing width.
/// Biases are phases in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub n_pixels: usize,
    /// Pixel duration, ns.
    pub dt: f64,
    /// Pixels at the start held at `reference` before smoothing.
    pub fixed_head: usize,
    /// Pixels at the end held at `reference` before smoothing.
    pub fixed_tail: usize,
    pub lower: f64,
    pub upper: f64,
    pub reference: f64,
    /// Gaussian smoothing width, ns.
    pub kernel_sigma: f64,
}

impl PulseShape {
    pub fn validate(&self) -> Result<()> {
        if self.n_pixels == 0 || !(self.dt > 0.0) {
            return Err(Error::Argument("pulse needs at least one pixel of positive duration".into()));
        }
        if self.fixed_head + self.fixed_tail >= self.n_pixels {
            return Err(Error::Argument(format!(
                "held edges ({} + {}) leave no free pixels out of {}",
                self.fixed_head, self.fixed_tail, self.n_pixels
            )));
        }
        if !(self.lower < self.upper) {
            return Err(Error::Argument("pulse lower bound must be below upper bound".into()));
        }
        if self.reference < self.lower || self.reference > self.upper {
            return Err(Error::Argument("reference bias must lie within the pulse bounds".into()));
        }
        if self.kernel_sigma < 0.0 {
            return Err(Error::Argument("smoothing width must be >= 0".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_pixels as f64 * self.dt
    }

    pub fn n_free(&self) -> usize {
        self.n_pixels - self.fixed_head - self.fixed_tail
    }

    pub fn free_range(&self) -> std::ops::Range<usize> {
        self.fixed_head..self.n_pixels - self.fixed_tail
    }

    pub fn jacobian(&self) -> DMatrix<f64> {
        smoothing_jacobian(self.n_pixels, self.kernel_sigma, self.dt)
    }

    /// Raw pixels from unconstrained optimizer variables, with the sigmoid slope
    /// `d raw / d x` for each free pixel.
    pub fn raw_from_free(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let span = self.upper - self.lower;
        let mut raw = vec![self.reference; self.n_pixels];
        let mut slope = Vec::with_capacity(x.len());
        for (k, &xi) in x.iter().enumerate() {
            let s = sigmoid(xi);
            raw[self.fixed_head + k] = self.lower + span * s;
            slope.push(span * s * (1.0 - s));
        }
        (raw, slope)
    }

    /// Inverse of [`raw_from_free`](Self::raw_from_free) for the free pixels.
    pub fn free_from_raw(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let span = self.upper - self.lower;
        raw[self.free_range()]
            .iter()
            .map(|&u| {
                let y = (u - self.lower) / span;
                if y <= 0.0 || y >= 1.0 {
                    Err(Error::Argument(format!(
                        "raw pixel {u} must lie strictly inside ({}, {})",
                        self.lower, self.upper
                    )))
                } else {
                    Ok((y / (1.0 - y)).ln())
                }
            })
            .collect()
    }

    /// Smoothed pixels, clamped into `[lower, upper]` against roundoff.
    pub fn physical(&self, raw: &[f64]) -> Vec<f64> {
        smooth(raw, self.kernel_sigma, self.dt)
            .into_iter()
            .map(|u| u.clamp(self.lower, self.upper))
            .collect()
    }

    /// Square pulse at `amplitude` on the free pixels.
    pub fn square_pulse(&self, amplitude: f64) -> ControlPulse {
        let mut raw = vec![self.reference; self.n_pixels];
        raw[self.free_range()].iter_mut().for_each(|u| *u = amplitude);
        ControlPulse {
            raw_pixels: raw,
            shape: self.clone(),
        }
    }
}

/// Raw (pre-smoothing) pixels on a given shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse {
    pub raw_pixels: Vec<f64>,
    pub shape: PulseShape,
}

impl ControlPulse {
    pub fn smoothed(&self) -> Vec<f64> {
        self.shape.physical(&self.raw_pixels)
    }

    /// Pixel start times, ns.
    pub fn times(&self) -> Vec<f64> {
        (0..self.shape.n_pixels).map(|k| k as f64 * self.shape.dt).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_width_is_identity() {
        let x = vec![0.3, -1.0, 2.5, 7.0];
        assert_eq!(smooth(&x, 0.0, 0.1), x);
        assert_eq!(smoothing_jacobian(4, 0.0, 0.1), DMatrix::identity(4, 4));
    }

    #[test]
    fn constant_pulse_unchanged() {
        let x = vec![1.25; 40];
        for v in smooth(&x, 0.5, 0.1) {
            assert!((v - 1.25).abs() < 1e-14);
        }
    }

    #[test]
    fn impulse_response_is_sampled_gaussian() {
        let n = 41;
        let mut x = vec![0.0; n];
        x[20] = 1.0;
        // sigma of two pixels
        let y = smooth(&x, 0.5, 0.25);
        let total: f64 = y.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // direct kernel oracle: exp(-k^2/8) over |k| <= 8, normalized
        let norm: f64 = (-8..=8).map(|k: i32| (-(k * k) as f64 / 8.0).exp()).sum();
        for k in -8i32..=8 {
            let want = (-(k * k) as f64 / 8.0).exp() / norm;
            assert!((y[(20 + k) as usize] - want).abs() < 1e-15);
        }
        assert_eq!(y[11], 0.0);
    }

    #[test]
    fn jacobian_rows_sum_to_one() {
        let j = smoothing_jacobian(50, 0.5, 0.1);
        for r in j.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_transform_round_trip() {
        let shape = PulseShape {
            n_pixels: 10,
            dt: 0.1,
            fixed_head: 2,
            fixed_tail: 2,
            lower: 1.0,
            upper: 2.0,
            reference: 1.0,
            kernel_sigma: 0.1,
        };
        shape.validate().unwrap();
        let pulse = shape.square_pulse(1.4);
        let x = shape.free_from_raw(&pulse.raw_pixels).unwrap();
        let (raw, _) = shape.raw_from_free(&x);
        for (a, b) in raw.iter().zip(&pulse.raw_pixels) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(shape.free_from_raw(&vec![1.0; 10]).is_err());
    }

    #[test]
    fn shape_validation() {
        let mut shape = PulseShape {
            n_pixels: 4,
            dt: 0.1,
            fixed_head: 2,
            fixed_tail: 2,
            lower: 0.0,
            upper: 1.0,
            reference: 0.0,
            kernel_sigma: 0.0,
        };
        assert!(shape.validate().is_err());
        shape.fixed_tail = 1;
        assert!(shape.validate().is_ok());
        shape.reference = 2.0;
        assert!(shape.validate().is_err());
    }

    proptest! {
        #[test]
        fn smooth_matches_jacobian(x in proptest::collection::vec(-3.0f64..3.0, 30), sigma in 0.0f64..0.6) {
            let y = smooth(&x, sigma, 0.05);
            let j = smoothing_jacobian(30, sigma, 0.05);
            let jy = &j * nalgebra::DVector::from_vec(x.clone());
            for (a, b) in y.iter().zip(jy.iter()) {
                prop_assert!((a - b).abs() < 1e-13);
            }
        }

        #[test]
        fn transformed_pulses_respect_bounds(x in proptest::collection::vec(-40.0f64..40.0, 6)) {
            let shape = PulseShape {
                n_pixels: 10, dt: 0.1, fixed_head: 2, fixed_tail: 2,
                lower: -0.5, upper: 0.25, reference: 0.0, kernel_sigma: 0.15,
            };
            let (raw, _) = shape.raw_from_free(&x);
            for u in shape.physical(&raw) {
                prop_assert!(u >= shape.lower && u <= shape.upper);
            }
        }
    }
}
