//! Matrix exponential by Padé approximation with scaling and squaring.
//!
//! Follows the degree-selection scheme of Higham (2005): the lowest diagonal
//! Padé degree in {3, 5, 7, 9, 13} whose backward-error bound covers the
//! 1-norm of the input is used directly, otherwise the input is scaled by a
//! power of two so the degree-13 approximant applies and the result is
//! squared back up. No eigendecomposition is involved, so defective inputs
//! (such as the block-triangular augmented matrices used for derivatives)
//! are handled like any other matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

type CMatrix = DMatrix<Complex64>;

fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled(a: &CMatrix, s: f64) -> CMatrix {
    a.map(|z| z * s)
}

/// U and V of the low-degree approximants, from the precomputed even powers.
fn low_degree_uv(a: &CMatrix, even_powers: &[CMatrix], coeffs: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let mut u_inner = CMatrix::identity(n, n) * Complex64::from(coeffs[1]);
    let mut v = CMatrix::identity(n, n) * Complex64::from(coeffs[0]);
    for (k, p) in even_powers.iter().enumerate() {
        let deg = 2 * (k + 1);
        v += scaled(p, coeffs[deg]);
        u_inner += scaled(p, coeffs[deg + 1]);
    }
    (a * u_inner, v)
}

fn degree_13_uv(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let b = &PADE_13;
    let id = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_high = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u_inner = &a6 * u_high
        + scaled(&a6, b[7])
        + scaled(&a4, b[5])
        + scaled(&a2, b[3])
        + scaled(&id, b[1]);
    let u = a * u_inner;
    let v_high = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * v_high
        + scaled(&a6, b[6])
        + scaled(&a4, b[4])
        + scaled(&a2, b[2])
        + scaled(&id, b[0]);
    (u, v)
}

fn pade_solve(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Numeric("singular Padé denominator".into()))
}

/// Matrix exponential of a square complex matrix.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("expm input contains NaN or Inf".into()));
    }
    let norm = one_norm(a);

    let low: [(f64, &[f64]); 4] = [
        (THETA_3, &PADE_3),
        (THETA_5, &PADE_5),
        (THETA_7, &PADE_7),
        (THETA_9, &PADE_9),
    ];
    for (theta, coeffs) in low {
        if norm <= theta {
            let a2 = a * a;
            let mut even = vec![a2];
            for _ in 1..(coeffs.len() / 2 - 1) {
                let next = even.last().unwrap() * &even[0];
                even.push(next);
            }
            let (u, v) = low_degree_uv(a, &even, coeffs);
            return pade_solve(&u, &v);
        }
    }

    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a_scaled = scaled(a, 0.5f64.powi(s));
    let (u, v) = degree_13_uv(&a_scaled);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("expm result overflowed".into()));
    }
    Ok(r)
}

/// Exponential of `a` together with the directional derivative
/// `d/dx exp(a + x b)` at `x = 0`, read off the blocks of
/// `exp([[a, b], [0, a]])`.
pub fn expm_directional_derivative(a: &CMatrix, b: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::Dimension(format!(
            "augmented exponential needs equal square blocks, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.nrows();
    let mut aug = CMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((n, n), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, n)).copy_from(b);
    let e = expm(&aug)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
    ))
}
