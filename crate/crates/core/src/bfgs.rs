//! Dense BFGS minimization with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BfgsSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evaluations: usize,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-7,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evaluations: 30,
        }
    }
}

impl BfgsSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config(format!(
                "line-search constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Config("gradient tolerance must be positive".into()));
        }
        if self.max_line_search_evaluations == 0 {
            return Err(Error::Config("line search needs at least one evaluation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
    pub termination: Termination,
}

struct Point {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

struct Counter<F> {
    objective: F,
    evaluations: usize,
}

impl<F> Counter<F>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    fn eval(&mut self, x: DVector<f64>) -> Result<Point> {
        self.evaluations += 1;
        let (f, g) = (self.objective)(&x)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer(format!(
                "objective returned non-finite value {f} (or gradient) at evaluation {}",
                self.evaluations
            )));
        }
        Ok(Point { x, f, g })
    }
}

fn cubic_minimizer(a_lo: f64, f_lo: f64, d_lo: f64, a_hi: f64, f_hi: f64, d_hi: f64) -> Option<f64> {
    let d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi);
    let disc = d1 * d1 - d_lo * d_hi;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (a_hi - a_lo).signum() * disc.sqrt();
    let denom = d_hi - d_lo + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let a = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom;
    a.is_finite().then_some(a)
}

/// Strong-Wolfe step length along `p` (Nocedal & Wright, algorithms 3.5/3.6).
/// Falls back to the best sufficient-decrease point when the budget runs out.
fn line_search<F>(
    counter: &mut Counter<F>,
    start: &Point,
    p: &DVector<f64>,
    alpha0: f64,
    s: &BfgsSettings,
) -> Result<Option<Point>>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let d0 = start.g.dot(p);
    let armijo = |a: f64, f: f64| f <= start.f + s.c1 * a * d0;
    let mut budget = s.max_line_search_evaluations;

    let probe = |counter: &mut Counter<F>, a: f64| -> Result<(Point, f64)> {
        let pt = counter.eval(&start.x + p * a)?;
        let d = pt.g.dot(p);
        Ok((pt, d))
    };

    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, start.f, d0);
    let mut prev_point: Option<Point> = None;
    let mut a = alpha0;
    let mut bracket: Option<(f64, f64, f64, Option<Point>, f64, f64, f64)> = None;

    let mut first = true;
    while budget > 0 {
        budget -= 1;
        let (pt, d) = probe(counter, a)?;
        if !armijo(a, pt.f) || (!first && pt.f >= f_prev) {
            bracket = Some((a_prev, f_prev, d_prev, prev_point.take(), a, pt.f, d));
            break;
        }
        if d.abs() <= -s.c2 * d0 {
            return Ok(Some(pt));
        }
        if d >= 0.0 {
            let (f_hi, d_hi) = (f_prev, d_prev);
            bracket = Some((a, pt.f, d, Some(pt), a_prev, f_hi, d_hi));
            break;
        }
        a_prev = a;
        f_prev = pt.f;
        d_prev = d;
        prev_point = Some(pt);
        a *= 2.0;
        first = false;
    }

    let Some((mut a_lo, mut f_lo, mut d_lo, mut lo_point, mut a_hi, mut f_hi, mut d_hi)) = bracket else {
        // expansion ran out of budget with steady decrease; take the last point
        return Ok(prev_point);
    };

    while budget > 0 {
        budget -= 1;
        let (lo, hi) = (a_lo.min(a_hi), a_lo.max(a_hi));
        let width = hi - lo;
        if width <= f64::EPSILON * hi.max(1e-300) {
            break;
        }
        let mut a = cubic_minimizer(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi).unwrap_or(0.5 * (lo + hi));
        if a < lo + 0.1 * width || a > hi - 0.1 * width {
            a = 0.5 * (lo + hi);
        }
        let (pt, d) = probe(counter, a)?;
        if !armijo(a, pt.f) || pt.f >= f_lo {
            a_hi = a;
            f_hi = pt.f;
            d_hi = d;
        } else {
            if d.abs() <= -s.c2 * d0 {
                return Ok(Some(pt));
            }
            if d * (a_hi - a_lo) >= 0.0 {
                a_hi = a_lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            a_lo = a;
            f_lo = pt.f;
            d_lo = d;
            lo_point = Some(pt);
        }
    }
    Ok(lo_point.filter(|pt| pt.f < start.f))
}

/// Minimizes `objective`, which returns the value and gradient at a point.
pub fn minimize<F>(x0: DVector<f64>, settings: &BfgsSettings, objective: F) -> Result<BfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    settings.validate()?;
    let n = x0.len();
    let mut counter = Counter {
        objective,
        evaluations: 0,
    };
    let mut current = counter.eval(x0)?;
    let mut inv_hessian = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut history = vec![current.f];
    let mut iterations = 0;

    let termination = loop {
        if current.g.norm() < settings.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }
        let mut p = -(&inv_hessian * &current.g);
        if current.g.dot(&p) >= 0.0 {
            inv_hessian = DMatrix::identity(n, n);
            scaled = false;
            p = -current.g.clone();
        }
        let alpha0 = if scaled { 1.0 } else { 1.0 / p.norm() };
        let Some(next) = line_search(&mut counter, &current, &p, alpha0, settings)? else {
            break Termination::LineSearchFailed;
        };

        let s = &next.x - &current.x;
        let y = &next.g - &current.g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                inv_hessian = DMatrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &inv_hessian * &y;
            let yhy = y.dot(&hy);
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded
            inv_hessian += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        current = next;
        history.push(current.f);
        iterations += 1;
    };

    Ok(BfgsOutcome {
        x: current.x,
        value: current.f,
        gradient: current.g,
        iterations,
        evaluations: counter.evaluations,
        history,
        termination,
    })
}
