//! Choi matrices, channel fidelities and CPTP checks.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouville::{perfect_sqrt, CMatrix, Propagator};

/// Choi matrix `C = Σ_ij |i><j| ⊗ E(|i><j|)` of a channel on a `d`-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix(CMatrix);

impl ChoiMatrix {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if !m.is_square() || perfect_sqrt(m.nrows()).is_none() {
            return Err(Error::Dimension(format!(
                "Choi matrix must be d^2 x d^2, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        perfect_sqrt(self.0.nrows()).unwrap()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// Reads the Choi matrix back as a propagator.
    pub fn to_propagator(&self, duration: f64) -> Propagator {
        Propagator::new(reshuffle_matrix(&self.0).unwrap(), duration).unwrap()
    }

    /// Image of `|i><j|` under the channel: block `(i, j)` of the Choi matrix.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let d = self.dim();
        self.0.view((d * i, d * j), (d, d)).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FidelityValue(pub f64);

impl FidelityValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Index permutation `C[dα+β, dα'+β'] = T[dβ'+β, dα'+α]` (0-based). It is its own inverse.
pub fn reshuffle_matrix(t: &CMatrix) -> Result<CMatrix> {
    let n = t.nrows();
    let d = match (t.is_square(), perfect_sqrt(n)) {
        (true, Some(d)) => d,
        _ => {
            return Err(Error::Dimension(format!(
                "reshuffle needs a d^2 x d^2 matrix, got {}x{}",
                t.nrows(),
                t.ncols()
            )))
        }
    };
    Ok(CMatrix::from_fn(n, n, |row, col| {
        let (a, b) = (row / d, row % d);
        let (a2, b2) = (col / d, col % d);
        t[(d * b2 + b, d * a2 + a)]
    }))
}

pub fn reshuffle(t: &Propagator) -> ChoiMatrix {
    ChoiMatrix(reshuffle_matrix(t.matrix()).unwrap())
}

/// `Re Tr{A^dagger B}`.
pub(crate) fn re_overlap(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn check_same(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<()> {
    if a.0.shape() != b.0.shape() {
        return Err(Error::Dimension(format!(
            "Choi matrices of shape {:?} and {:?}",
            a.0.shape(),
            b.0.shape()
        )));
    }
    Ok(())
}

fn normalization(target: &ChoiMatrix) -> Result<f64> {
    let n = re_overlap(&target.0, &target.0);
    if n <= 0.0 {
        return Err(Error::ZeroTarget);
    }
    Ok(n)
}

/// `Re Tr{C_t^dagger C} / Re Tr{C_t^dagger C_t}`.
pub fn frobenius_fidelity(target: &ChoiMatrix, realized: &ChoiMatrix) -> Result<FidelityValue> {
    check_same(target, realized)?;
    let norm = normalization(target)?;
    Ok(FidelityValue(re_overlap(&target.0, &realized.0) / norm))
}

/// One gradient entry: the fidelity contraction applied to a Choi-matrix derivative.
pub fn fidelity_gradient_term(target: &ChoiMatrix, d_choi: &ChoiMatrix) -> Result<f64> {
    check_same(target, d_choi)?;
    let norm = normalization(target)?;
    Ok(re_overlap(&target.0, &d_choi.0) / norm)
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

const SQRT_CLIP: f64 = 1e-12;
const SQRT_REJECT: f64 = -1e-6;

fn psd_sqrt(m: &CMatrix, what: &str) -> Result<CMatrix> {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut roots = DVector::<Complex64>::zeros(eig.eigenvalues.len());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < SQRT_REJECT {
            return Err(Error::Validity(format!(
                "{what} has eigenvalue {lam:.3e}, not positive semidefinite"
            )));
        }
        let lam = if lam < SQRT_CLIP { 0.0 } else { lam };
        roots[k] = Complex64::new(lam.sqrt(), 0.0);
    }
    let v = &eig.eigenvectors;
    Ok(v * CMatrix::from_diagonal(&roots) * v.adjoint())
}

/// Square-root channel fidelity `(Tr sqrt(sqrt(C_t) C sqrt(C_t)))^2 / d^2`.
/// Diagnostic only: it has no closed-form gradient.
pub fn sqrt_channel_fidelity(target: &ChoiMatrix, realized: &ChoiMatrix) -> Result<f64> {
    check_same(target, realized)?;
    let d = target.dim() as f64;
    let root_t = psd_sqrt(&target.0, "target Choi matrix")?;
    // reject a non-PSD realized channel as well
    psd_sqrt(&realized.0, "realized Choi matrix")?;
    let inner = &root_t * &realized.0 * &root_t;
    let mut trace = 0.0;
    for lam in hermitian_eigenvalues(&inner) {
        if lam < SQRT_REJECT {
            return Err(Error::Validity(format!("inner product matrix has eigenvalue {lam:.3e}")));
        }
        if lam > SQRT_CLIP {
            trace += lam.sqrt();
        }
    }
    Ok(trace * trace / (d * d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    /// Smallest eigenvalue of the Hermitized Choi matrix.
    pub min_eigenvalue: f64,
    /// Frobenius norm of `Tr_out C - 1`.
    pub tp_residual: f64,
}

impl CptpReport {
    pub fn is_cptp(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol && self.tp_residual <= tol
    }
}

/// Partial trace over the output (second) tensor factor.
pub fn partial_trace_output(c: &ChoiMatrix) -> CMatrix {
    let d = c.dim();
    CMatrix::from_fn(d, d, |a, a2| (0..d).map(|b| c.0[(d * a + b, d * a2 + b)]).sum())
}

pub fn cptp_report(c: &ChoiMatrix) -> CptpReport {
    let d = c.dim();
    let min_eigenvalue = hermitian_eigenvalues(&c.0)[0];
    let tp_residual = (partial_trace_output(c) - CMatrix::identity(d, d)).norm();
    CptpReport {
        min_eigenvalue,
        tp_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn ket_bra(d: usize, i: usize, j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        m[(i, j)] = c(1.0);
        m
    }

    #[test]
    fn identity_channel_choi() {
        let choi = reshuffle(&Propagator::identity(2));
        let mut want = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                want += ket_bra(2, i, j).kronecker(&ket_bra(2, i, j));
            }
        }
        assert_eq!(choi.matrix(), &want);
        let tr: Complex64 = choi.matrix().trace();
        assert!((tr - c(2.0)).norm() < 1e-15);
        let eig = hermitian_eigenvalues(choi.matrix());
        assert!((eig[3] - 2.0).abs() < 1e-12 && eig[2].abs() < 1e-12);
        let report = cptp_report(&choi);
        assert!(report.min_eigenvalue.abs() < 1e-12);
        assert!(report.tp_residual < 1e-15);
    }

    #[test]
    fn reshuffle_rejects_bad_shapes() {
        assert!(reshuffle_matrix(&CMatrix::zeros(5, 5)).is_err());
        assert!(reshuffle_matrix(&CMatrix::zeros(4, 9)).is_err());
    }

    #[test]
    fn zero_target_is_an_error() {
        let z = ChoiMatrix::from_matrix(CMatrix::zeros(4, 4)).unwrap();
        assert!(matches!(frobenius_fidelity(&z, &z), Err(Error::ZeroTarget)));
    }

    #[test]
    fn gradient_term_normalization() {
        let t = reshuffle(&Propagator::identity(3));
        let zero = ChoiMatrix::from_matrix(CMatrix::zeros(9, 9)).unwrap();
        assert_eq!(fidelity_gradient_term(&t, &zero).unwrap(), 0.0);
        assert!((fidelity_gradient_term(&t, &t).unwrap() - 1.0).abs() < 1e-15);
        assert!((frobenius_fidelity(&t, &t).unwrap().value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn planted_negative_eigenvalue() {
        // rotate diag(-0.1, 0.3, 0.5, 1.0) by a fixed unitary
        let diag = CMatrix::from_diagonal(&DVector::from_vec(vec![c(-0.1), c(0.3), c(0.5), c(1.0)]));
        let h = CMatrix::from_fn(4, 4, |i, j| Complex64::new((i + j) as f64 * 0.3, i as f64 - j as f64));
        let h = hermitize(&h);
        let u = crate::liouville::expm(&(h * Complex64::new(0.0, -1.0))).unwrap();
        let m = &u * diag * u.adjoint();
        let r = cptp_report(&ChoiMatrix::from_matrix(m).unwrap());
        assert!((r.min_eigenvalue + 0.1).abs() < 1e-12);
    }

    #[test]
    fn sqrt_fidelity_rejects_non_psd() {
        let mut m = CMatrix::identity(4, 4);
        m[(0, 0)] = c(-0.5);
        let bad = ChoiMatrix::from_matrix(m).unwrap();
        let good = reshuffle(&Propagator::identity(2));
        assert!(matches!(sqrt_channel_fidelity(&bad, &good), Err(Error::Validity(_))));
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
            .prop_map(move |v| CMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
    }

    proptest! {
        #[test]
        fn reshuffle_is_involutive_isometry(t in arb_matrix(9)) {
            let once = reshuffle_matrix(&t).unwrap();
            let twice = reshuffle_matrix(&once).unwrap();
            prop_assert_eq!(&twice, &t);
            prop_assert!((once.norm() - t.norm()).abs() < 1e-12);
        }

        #[test]
        fn frobenius_expansion(a in arb_matrix(4), b in arb_matrix(4)) {
            let a = hermitize(&a);
            let b = hermitize(&b);
            let lhs = re_overlap(&a, &b);
            let ta2 = (&a * &a).trace().re;
            let tb2 = (&b * &b).trace().re;
            let diff = (&a - &b).norm_squared();
            prop_assert!((lhs - 0.5 * (ta2 + tb2 - diff)).abs() < 1e-10);
        }

        #[test]
        fn fidelity_linear_along_interpolation(t in arb_matrix(4), lam in 0.0f64..1.0) {
            let target = ChoiMatrix::from_matrix(hermitize(&t) + CMatrix::identity(4, 4)).unwrap();
            let start = reshuffle(&Propagator::identity(2));
            let mix = ChoiMatrix::from_matrix(
                start.matrix() * c(1.0 - lam) + target.matrix() * c(lam)
            ).unwrap();
            let f0 = frobenius_fidelity(&target, &start).unwrap().value();
            let f = frobenius_fidelity(&target, &mix).unwrap().value();
            prop_assert!((f - ((1.0 - lam) * f0 + lam)).abs() < 1e-12);
        }
    }
}
