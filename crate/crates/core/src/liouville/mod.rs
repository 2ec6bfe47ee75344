//! Vectorized Lindblad dynamics.
//!
//! Density matrices are column stacked: entry `rho[(i, j)]` of a `d x d`
//! matrix lives at index `d * j + i` of the vector. That is also nalgebra's
//! storage order, so stacking is a copy of the backing slice. Every formula
//! for generators and Choi matrices in this crate assumes this convention.
//!
//! Frequencies are angular (rad/ns, the Hamiltonian is `H / hbar`) and rates
//! are in 1/ns.

mod expm;

pub use expm::{expm, expm_directional_derivative};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest elementwise deviation `|M - M^dagger|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn column_stack(m: &CMatrix) -> Result<CVector> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "column stacking needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(CVector::from_column_slice(m.as_slice()))
}

pub fn unstack(v: &CVector) -> Result<CMatrix> {
    let d = perfect_sqrt(v.len())
        .ok_or_else(|| Error::Dimension(format!("vector length {} is not a square", v.len())))?;
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

pub(crate) fn perfect_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Hermitian Hamiltonian in angular-frequency units.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix(CMatrix);

impl HamiltonianMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension("Hamiltonian must be square".into()));
        }
        let dev = hermitian_deviation(&entries);
        let tol = HERMITIAN_TOL * max_abs(&entries).max(1.0);
        if dev > tol {
            return Err(Error::Validity(format!(
                "Hamiltonian is not Hermitian (max |H - H^dagger| = {dev:.3e})"
            )));
        }
        Ok(Self(entries))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// A Lindblad operator with its non-negative rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayChannel {
    pub operator: CMatrix,
    pub rate: f64,
}

impl DecayChannel {
    pub fn new(operator: CMatrix, rate: f64) -> Result<Self> {
        if !operator.is_square() {
            return Err(Error::Dimension("Lindblad operator must be square".into()));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::Validity(format!("decay rate must be >= 0, got {rate}")));
        }
        Ok(Self { operator, rate })
    }
}

/// `d^2 x d^2` generator of the vectorized master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator(CMatrix);

impl Generator {
    /// Wraps a raw superoperator without checking trace preservation.
    /// Derivatives of generators (which annihilate `col(1)^T` as well) use this too.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if !m.is_square() || perfect_sqrt(m.nrows()).is_none() {
            return Err(Error::Dimension(format!(
                "generator must be d^2 x d^2, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d * d, d * d))
    }

    pub fn dim(&self) -> usize {
        perfect_sqrt(self.0.nrows()).unwrap()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Norm of `col(1)^T S`; zero for trace-preserving dynamics.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim();
        let id = column_stack(&CMatrix::identity(d, d)).unwrap();
        (id.transpose() * &self.0).norm()
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Generator, factor: f64) -> Generator {
        Generator(&self.0 + other.0.map(|z| z * factor))
    }
}

impl std::ops::Add for &Generator {
    type Output = Generator;
    fn add(self, rhs: &Generator) -> Generator {
        Generator(&self.0 + &rhs.0)
    }
}

/// Coherent part `i (H^T ⊗ 1 - 1 ⊗ H)`.
pub fn commutator_superop(h: &CMatrix) -> CMatrix {
    let d = h.nrows();
    let id = CMatrix::identity(d, d);
    (kron(&h.transpose(), &id) - kron(&id, h)) * Complex64::i()
}

/// Dissipator `L* ⊗ L - ½ L^T L* ⊗ 1 - ½ 1 ⊗ L^dagger L` at unit rate.
pub fn dissipator_superop(l: &CMatrix) -> CMatrix {
    let d = l.nrows();
    let id = CMatrix::identity(d, d);
    let lc = l.conjugate();
    let half = Complex64::new(0.5, 0.0);
    kron(&lc, l) - kron(&(l.transpose() * &lc), &id) * half - kron(&id, &(l.adjoint() * l)) * half
}

/// Derivative of [`dissipator_superop`] along `dl`, for an operator `l(x)` with `l'(x) = dl`.
pub fn dissipator_superop_derivative(l: &CMatrix, dl: &CMatrix) -> CMatrix {
    let d = l.nrows();
    let id = CMatrix::identity(d, d);
    let lc = l.conjugate();
    let dlc = dl.conjugate();
    let half = Complex64::new(0.5, 0.0);
    kron(&dlc, l) + kron(&lc, dl)
        - kron(&(dl.transpose() * &lc + l.transpose() * &dlc), &id) * half
        - kron(&id, &(dl.adjoint() * l + l.adjoint() * dl)) * half
}

pub fn build_generator(h: &HamiltonianMatrix, channels: &[DecayChannel]) -> Result<Generator> {
    let d = h.dim();
    let mut s = commutator_superop(h.matrix());
    for ch in channels {
        if ch.operator.nrows() != d {
            return Err(Error::Dimension(format!(
                "Lindblad operator is {}x{}, Hamiltonian is {d}x{d}",
                ch.operator.nrows(),
                ch.operator.ncols()
            )));
        }
        if ch.rate < 0.0 {
            return Err(Error::Validity(format!("negative decay rate {}", ch.rate)));
        }
        s += dissipator_superop(&ch.operator) * Complex64::from(ch.rate);
    }
    Ok(Generator(s))
}

/// Time-ordered propagator of a piecewise-constant evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    matrix: CMatrix,
    duration: f64,
}

impl Propagator {
    pub fn new(matrix: CMatrix, duration: f64) -> Result<Self> {
        if !matrix.is_square() || perfect_sqrt(matrix.nrows()).is_none() {
            return Err(Error::Dimension(format!(
                "propagator must be d^2 x d^2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, duration })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: CMatrix::identity(d * d, d * d),
            duration: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        perfect_sqrt(self.matrix.nrows()).unwrap()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Norm of `col(1)^T T - col(1)^T`.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim();
        let id = column_stack(&CMatrix::identity(d, d)).unwrap().transpose();
        (&id * &self.matrix - &id).norm()
    }

    /// `later ∘ self`: apply `self` first, then `later`.
    pub fn then(&self, later: &Propagator) -> Propagator {
        Propagator {
            matrix: &later.matrix * &self.matrix,
            duration: self.duration + later.duration,
        }
    }
}

/// `exp(S * dt)` for a single pixel.
pub fn pixel_propagator(s: &Generator, dt: f64) -> Result<Propagator> {
    let m = expm(&s.0.map(|z| z * dt))?;
    Propagator::new(m, dt)
}

/// Product of pixel exponentials with pixel 0 applied first (rightmost).
pub fn piecewise_propagator(generators: &[Generator], dt: f64) -> Result<Propagator> {
    if generators.is_empty() {
        return Err(Error::Argument("piecewise propagator needs at least one pixel".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("pixel duration must be positive, got {dt}")));
    }
    let d = generators[0].dim();
    let mut total = CMatrix::identity(d * d, d * d);
    for g in generators {
        if g.dim() != d {
            return Err(Error::Dimension("generators of mixed dimension".into()));
        }
        total = expm(&g.0.map(|z| z * dt))? * total;
    }
    Propagator::new(total, dt * generators.len() as f64)
}

/// Column-stacked density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector(CVector);

impl DensityVector {
    pub fn from_matrix(rho: &CMatrix) -> Result<Self> {
        Ok(Self(column_stack(rho)?))
    }

    pub fn from_vector(v: CVector) -> Result<Self> {
        perfect_sqrt(v.len())
            .ok_or_else(|| Error::Dimension(format!("length {} is not a square", v.len())))?;
        Ok(Self(v))
    }

    /// `|k><k|` in dimension `d`.
    pub fn basis_state(d: usize, k: usize) -> Self {
        let mut v = CVector::zeros(d * d);
        v[d * k + k] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        perfect_sqrt(self.0.len()).unwrap()
    }

    pub fn vector(&self) -> &CVector {
        &self.0
    }

    pub fn to_matrix(&self) -> CMatrix {
        unstack(&self.0).unwrap()
    }

    /// Real diagonal of the unstacked matrix.
    pub fn populations(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|k| self.0[d * k + k].re).collect()
    }
}

pub fn evolve(t: &Propagator, rho0: &DensityVector) -> Result<DensityVector> {
    if t.matrix.ncols() != rho0.0.len() {
        return Err(Error::Dimension(format!(
            "propagator acts on length {}, state has length {}",
            t.matrix.ncols(),
            rho0.0.len()
        )));
    }
    Ok(DensityVector(&t.matrix * &rho0.0))
}
