mod common;

use channel_grape::channel::{
    cptp_report, frobenius_fidelity, hermitian_eigenvalues, reshuffle, sqrt_channel_fidelity, ChoiMatrix,
};
use channel_grape::liouville::{
    build_generator, column_stack, commutator_superop, dissipator_superop, evolve, expm,
    expm_directional_derivative, kron, piecewise_propagator, pixel_propagator, unstack, CMatrix, DecayChannel,
    DensityVector, Generator, HamiltonianMatrix, Propagator,
};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn expm_matches_taylor_series() {
    let mut r = rng(11);
    for _ in 0..20 {
        let a = with_norm(random_matrix(&mut r, 6), 5.0);
        let e = expm(&a).unwrap();
        let t = taylor_expm(&a, 200);
        assert!(rel_diff(&e, &t) < 1e-12, "rel diff {}", rel_diff(&e, &t));
    }
}

#[test]
fn expm_of_large_norm_hermitian_is_unitary() {
    let mut r = rng(12);
    let h = with_norm(random_hermitian(&mut r, 5), 200.0);
    let u = expm(&(h * Complex64::new(0.0, -1.0))).unwrap();
    let id = CMatrix::identity(5, 5);
    assert!((u.adjoint() * &u - id).norm() < 1e-11);
}

#[test]
fn directional_derivative_matches_finite_difference() {
    let mut r = rng(13);
    for _ in 0..5 {
        let a = with_norm(random_matrix(&mut r, 9), 3.0);
        let b = random_matrix(&mut r, 9);
        let (e, de) = expm_directional_derivative(&a, &b).unwrap();
        assert!(rel_diff(&e, &expm(&a).unwrap()) < 1e-13);
        let h = 1e-5;
        let fd = (expm(&(&a + &b * c(h))).unwrap() - expm(&(&a - &b * c(h))).unwrap()) * c(0.5 / h);
        assert!(rel_diff(&de, &fd) < 1e-7, "rel diff {}", rel_diff(&de, &fd));
    }
}

#[test]
fn directional_derivative_is_linear_in_direction() {
    let mut r = rng(14);
    let a = random_matrix(&mut r, 4);
    let b1 = random_matrix(&mut r, 4);
    let b2 = random_matrix(&mut r, 4);
    let k = Complex64::new(0.7, -1.3);
    let (_, d1) = expm_directional_derivative(&a, &b1).unwrap();
    let (_, d2) = expm_directional_derivative(&a, &b2).unwrap();
    let (_, d12) = expm_directional_derivative(&a, &(&b1 + &b2 * k)).unwrap();
    assert!(rel_diff(&d12, &(d1 + d2 * k)) < 1e-12);
}

#[test]
fn column_stacking_of_products() {
    let mut r = rng(15);
    let (a, b, x) = (random_matrix(&mut r, 3), random_matrix(&mut r, 3), random_matrix(&mut r, 3));
    let lhs = column_stack(&(&a * &x * &b)).unwrap();
    let rhs = kron(&b.transpose(), &a) * column_stack(&x).unwrap();
    assert!((lhs - rhs).norm() < 1e-12);
    assert_eq!(unstack(&column_stack(&x).unwrap()).unwrap(), x);
}

#[test]
fn amplitude_damping_populations_decay_exponentially() {
    let gamma = 0.37;
    let mut l = CMatrix::zeros(2, 2);
    l[(0, 1)] = c(1.0);
    let s = build_generator(&HamiltonianMatrix::zeros(2), &[DecayChannel::new(l, gamma).unwrap()]).unwrap();
    let rho0 = DensityVector::basis_state(2, 1);
    for t in [0.1, 1.0, 3.0, 10.0] {
        let p = evolve(&pixel_propagator(&s, t).unwrap(), &rho0).unwrap().populations();
        assert!((p[1] - (-gamma * t).exp()).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-13);
    }
}

#[test]
fn unitary_limit_and_choi_of_unitary() {
    let mut r = rng(16);
    let h = random_hermitian(&mut r, 3);
    let t = 0.8;
    let s = build_generator(&HamiltonianMatrix::new(h.clone()).unwrap(), &[]).unwrap();
    let p = pixel_propagator(&s, t).unwrap();
    let u = expm(&(&h * Complex64::new(0.0, -t))).unwrap();
    assert!((p.matrix() - unitary_superop(&u)).norm() < 1e-12);
    // the Choi matrix of a unitary is the rank-one projector on col(U)
    let choi = reshuffle(&p);
    let v = column_stack(&u).unwrap();
    assert!((choi.matrix() - &v * v.adjoint()).norm() < 1e-12);
    let f = frobenius_fidelity(&choi, &choi).unwrap().value();
    assert!((f - 1.0).abs() < 1e-14);
}

#[test]
fn amplitude_damping_choi_is_positive() {
    let mut l = CMatrix::zeros(3, 3);
    l[(0, 2)] = c(1.0);
    l[(1, 2)] = c(0.5);
    let s = build_generator(&HamiltonianMatrix::zeros(3), &[DecayChannel::new(l, 0.9).unwrap()]).unwrap();
    let choi = reshuffle(&pixel_propagator(&s, 2.0).unwrap());
    let rep = cptp_report(&choi);
    assert!(rep.min_eigenvalue > -1e-12 && rep.tp_residual < 1e-12);
    let ev = hermitian_eigenvalues(choi.matrix());
    assert!((ev.iter().sum::<f64>() - 3.0).abs() < 1e-12);
}

#[test]
fn semigroup_and_time_ordering() {
    let mut r = rng(17);
    let a = Generator::from_matrix(commutator_superop(&random_hermitian(&mut r, 2))).unwrap();
    let b = Generator::from_matrix(dissipator_superop(&random_matrix(&mut r, 2))).unwrap();
    let whole = pixel_propagator(&a, 0.6).unwrap();
    let halves = piecewise_propagator(&[a.clone(), a.clone()], 0.3).unwrap();
    assert!((whole.matrix() - halves.matrix()).norm() < 1e-13);
    // the later pixel multiplies from the left
    let ab = piecewise_propagator(&[a.clone(), b.clone()], 0.5).unwrap();
    let pa = pixel_propagator(&a, 0.5).unwrap();
    let pb = pixel_propagator(&b, 0.5).unwrap();
    assert!((ab.matrix() - pb.matrix() * pa.matrix()).norm() < 1e-13);
    assert!((pa.then(&pb).matrix() - ab.matrix()).norm() < 1e-13);
    assert!((ab.duration() - 1.0).abs() < 1e-15);
}

#[test]
fn gate_overlap_for_unitary_channels() {
    let mut r = rng(18);
    for d in 2..=4 {
        let (u, v) = (random_unitary(&mut r, d), random_unitary(&mut r, d));
        let cu = reshuffle(&Propagator::new(unitary_superop(&u), 1.0).unwrap());
        let cv = reshuffle(&Propagator::new(unitary_superop(&v), 1.0).unwrap());
        let overlap = (u.adjoint() * &v).trace().norm_sqr() / (d * d) as f64;
        let f = frobenius_fidelity(&cu, &cv).unwrap().value();
        let g = sqrt_channel_fidelity(&cu, &cv).unwrap();
        assert!((f - overlap).abs() < 1e-10, "frobenius {f} vs {overlap}");
        assert!((g - overlap).abs() < 1e-8, "sqrt form {g} vs {overlap}");
    }
}

#[test]
fn identity_propagator_gives_identity_choi_blocks() {
    let choi: ChoiMatrix = reshuffle(&Propagator::identity(2));
    for i in 0..2 {
        for j in 0..2 {
            let b = choi.block(i, j);
            let mut want = CMatrix::zeros(2, 2);
            want[(i, j)] = c(1.0);
            assert_eq!(b, want);
        }
    }
}

fn hermitian_strategy(d: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |v| {
        let a = CMatrix::from_fn(d, d, |i, j| Complex64::new(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]));
        (&a + a.adjoint()) * c(0.5)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lindblad_evolution_preserves_trace_and_hermiticity(
        h in hermitian_strategy(3),
        l in hermitian_strategy(3),
        rate in 0.0f64..2.0,
        t in 0.0f64..3.0,
    ) {
        let s = build_generator(
            &HamiltonianMatrix::new(h).unwrap(),
            &[DecayChannel::new(l * Complex64::new(0.3, 0.8), rate).unwrap()],
        ).unwrap();
        prop_assert!(s.trace_residual() < 1e-12);
        let p = pixel_propagator(&s, t).unwrap();
        prop_assert!(p.trace_residual() < 1e-10);
        let mut rho = CMatrix::zeros(3, 3);
        rho[(0, 0)] = c(0.5);
        rho[(2, 2)] = c(0.5);
        rho[(0, 2)] = c(0.5);
        rho[(2, 0)] = c(0.5);
        let out = evolve(&p, &DensityVector::from_matrix(&rho).unwrap()).unwrap().to_matrix();
        prop_assert!((&out - out.adjoint()).norm() < 1e-10);
        prop_assert!((out.trace().re - 1.0).abs() < 1e-10);
        let rep = cptp_report(&reshuffle(&p));
        prop_assert!(rep.min_eigenvalue > -1e-9);
    }

    #[test]
    fn frobenius_fidelity_is_bounded_for_channels(seed in 0u64..1000) {
        let mut r = rng(seed);
        let a = random_channel(&mut r, 2);
        let b = random_channel(&mut r, 2);
        let f = frobenius_fidelity(&a, &b).unwrap().value();
        prop_assert!(f.is_finite());
        prop_assert!((frobenius_fidelity(&a, &a).unwrap().value() - 1.0).abs() < 1e-12);
    }
}
