//! Dense complex helpers shared by the operator, channel and fidelity code.

use ndarray::{Array1, Array2, ShapeBuilder, Zip};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::Result;

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;

/// Conjugate transpose.
pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = 0.5 * (m[[i, j]] + m[[j, i]].conj());
        }
    }
    out
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0f64, |acc, x, y| acc.max((x - y).norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().iter().sum()
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending,
/// eigenvectors in the columns.
///
/// The input is copied into column-major order first: for row-major complex
/// input the LAPACK wrapper returns the eigenvectors of the conjugate matrix.
pub fn eigh(m: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    let mut fortran = Array2::zeros(m.raw_dim().f());
    fortran.assign(m);
    Ok(fortran.eigh(UPLO::Lower)?)
}

/// `exp(G)` for an anti-Hermitian generator, through the eigenbasis of the
/// Hermitian matrix `iG`: with `iG = V w V†`, `exp(G) = V exp(-i w) V†`.
pub fn expm_antihermitian(generator: &CMatrix) -> Result<CMatrix> {
    let herm = generator.mapv(|z| z * C64::i());
    let (w, v) = eigh(&hermitian_part(&herm))?;
    let phases = w.mapv(|x| C64::from_polar(1.0, -x));
    let mut scaled = v.clone();
    for (mut col, ph) in scaled.columns_mut().into_iter().zip(phases.iter()) {
        col.mapv_inplace(|z| z * ph);
    }
    Ok(scaled.dot(&adjoint(&v)))
}
