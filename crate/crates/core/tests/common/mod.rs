#![allow(dead_code)]

use channel_grape::channel::{reshuffle, ChoiMatrix};
use channel_grape::liouville::{
    commutator_superop, dissipator_superop, expm, CMatrix, Generator, Propagator,
};
use channel_grape::optimizer::ControlModel;
use channel_grape::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn random_matrix(r: &mut impl Rng, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(r: &mut impl Rng, d: usize) -> CMatrix {
    let a = random_matrix(r, d);
    (&a + a.adjoint()) * c(0.5)
}

pub fn with_norm(m: CMatrix, norm: f64) -> CMatrix {
    let n = m.norm();
    m * c(norm / n)
}

pub fn random_unitary(r: &mut impl Rng, d: usize) -> CMatrix {
    let h = random_hermitian(r, d);
    expm(&(h * Complex64::new(0.0, -2.0))).unwrap()
}

/// Superoperator of `ρ -> U ρ U†` in column stacking.
pub fn unitary_superop(u: &CMatrix) -> CMatrix {
    u.conjugate().kronecker(u)
}

/// `Σ_k A^k / k!` with Kahan-compensated accumulation per entry.
pub fn taylor_expm(a: &CMatrix, terms: usize) -> CMatrix {
    let d = a.nrows();
    let mut sum = CMatrix::identity(d, d);
    let mut comp = CMatrix::zeros(d, d);
    let mut term = CMatrix::identity(d, d);
    for k in 1..terms {
        term = &term * a * c(1.0 / k as f64);
        for idx in 0..d * d {
            let y = term[idx] - comp[idx];
            let t = sum[idx] + y;
            comp[idx] = (t - sum[idx]) - y;
            sum[idx] = t;
        }
    }
    sum
}

pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Random controllable three-level problem: Hermitian drift plus a
/// dissipator, a linear control Hamiltonian and exponential rate curves
/// `γ_j(u) = a_j exp(b_j u)` on random jump operators.
pub struct RandomModel {
    pub d: usize,
    drift: Generator,
    control_h: CMatrix,
    jumps: Vec<(CMatrix, f64, f64)>,
}

impl RandomModel {
    pub fn new(r: &mut impl Rng, d: usize) -> Self {
        let h0 = random_hermitian(r, d);
        let l0 = random_matrix(r, d);
        let drift = commutator_superop(&h0) + dissipator_superop(&l0) * c(r.gen_range(0.02..0.1));
        let control_h = commutator_superop(&(random_hermitian(r, d) * c(2.0)));
        let jumps = (0..2)
            .map(|_| (dissipator_superop(&random_matrix(r, d)), r.gen_range(0.05..0.3), r.gen_range(-1.0..1.0)))
            .collect();
        Self {
            d,
            drift: Generator::from_matrix(drift).unwrap(),
            control_h,
            jumps,
        }
    }

    /// Purely coherent variant: `H(u) = H0 + u H1`.
    pub fn unitary(r: &mut impl Rng, d: usize) -> (Self, CMatrix, CMatrix) {
        let h0 = random_hermitian(r, d);
        let h1 = random_hermitian(r, d);
        let m = Self {
            d,
            drift: Generator::from_matrix(commutator_superop(&h0)).unwrap(),
            control_h: commutator_superop(&h1),
            jumps: Vec::new(),
        };
        (m, h0, h1)
    }
}

impl ControlModel for RandomModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn drift(&self) -> &Generator {
        &self.drift
    }

    fn control(&self, u: f64) -> Result<(Generator, Generator)> {
        let mut s = &self.control_h * c(u);
        let mut ds = self.control_h.clone();
        for (dis, a, b) in &self.jumps {
            let g = a * (b * u).exp();
            s += dis * c(g);
            ds += dis * c(b * g);
        }
        Ok((Generator::from_matrix(s)?, Generator::from_matrix(ds)?))
    }
}

/// Choi matrix of `exp(S t)` for a random Lindbladian: a generic CPTP target.
pub fn random_channel(r: &mut impl Rng, d: usize) -> ChoiMatrix {
    let s = commutator_superop(&random_hermitian(r, d)) + dissipator_superop(&random_matrix(r, d)) * c(0.4);
    let t = expm(&s).unwrap();
    reshuffle(&Propagator::new(t, 1.0).unwrap())
}
