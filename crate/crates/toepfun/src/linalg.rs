//! Dense helpers shared by the higher modules: norms, Hermitian checks,
//! eigenvalue routines backed by nalgebra decompositions.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::{C64, CMatrix, CVector};

#[derive(Debug, Error)]
pub enum EigError {
    #[error("eigensolver did not converge within {max_sweeps} sweeps (n = {n})")]
    NonConvergence { n: usize, max_sweeps: usize },
    #[error("eigendecomposition residual {residual:.3e} exceeds {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
}

/// Spectral norm via singular values.
pub fn norm2(a: &CMatrix) -> f64 {
    nalgebra::SVD::new_unordered(a.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Induced 1-norm (max absolute column sum).
pub fn norm1(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

/// max |A - A*| over entries, the Hermitian defect.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut defect = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    defect
}

/// Hermitian within the certification tolerance 1e-12 · ||A||_F.
pub fn is_hermitian(a: &CMatrix) -> bool {
    hermitian_defect(a) <= 1e-12 * frobenius(a).max(f64::MIN_POSITIVE)
}

/// (A + A*)/2.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn all_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigenvalues of a general complex matrix via the complex Schur form,
/// certified by Frobenius reconstruction of `Q T Q*`.
///
/// The QR iteration's relative deflation test can stall when adjacent
/// diagonal entries are exactly zero (e.g. the zero matrix); a diagonal
/// shift retry covers that corner.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>, EigError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let max_sweeps = 75 * n.max(32);
    let (schur, shift) = match a.clone().try_schur(1e-13, max_sweeps) {
        Some(s) => (s, C64::new(0.0, 0.0)),
        None => {
            let shift = C64::new(1.0 + frobenius(a) / (n as f64).sqrt(), 0.0);
            let shifted = a + CMatrix::identity(n, n) * shift;
            let s = shifted
                .try_schur(1e-13, max_sweeps)
                .ok_or(EigError::NonConvergence { n, max_sweeps })?;
            (s, shift)
        }
    };
    let (q, t) = schur.unpack();
    let target = a + CMatrix::identity(n, n) * shift;
    let scale = frobenius(&target).max(f64::MIN_POSITIVE);
    let residual = frobenius(&(&q * &t * q.adjoint() - target)) / scale;
    if residual > 1e-8 {
        return Err(EigError::ResidualTooLarge {
            residual,
            tol: 1e-8,
        });
    }
    Ok((0..n).map(|i| t[(i, i)] - shift).collect())
}

fn eigenpair_residual(h: &CMatrix, lam: &[f64], v: &CMatrix) -> f64 {
    let av = h * v;
    let mut worst = 0.0f64;
    for (j, &l) in lam.iter().enumerate() {
        worst = worst.max((av.column(j) - v.column(j).scale(l)).norm());
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues plus a unitary
/// eigenvector matrix. The input is symmetrized first; the residual
/// ||A v - λ v|| is certified against 1e-8 · ||A||. When the tridiagonal
/// iteration misses that target (it occasionally does on clustered spectra),
/// the complex Schur form is used instead — for a Hermitian matrix its T is
/// diagonal, so Q is the eigenvector matrix, and the same certification
/// applies.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix), EigError> {
    let h = symmetrize(a);
    let n = h.nrows();
    let scale = frobenius(&h).max(f64::MIN_POSITIVE);
    let se = SymmetricEigen::new(h.clone());
    let v = se.eigenvectors;
    let lam: Vec<f64> = se.eigenvalues.iter().cloned().collect();
    let worst = eigenpair_residual(&h, &lam, &v);
    if worst <= 1e-8 * scale {
        return Ok((lam, v));
    }
    let max_sweeps = 75 * n.max(32);
    let schur = h
        .clone()
        .try_schur(1e-13, max_sweeps)
        .ok_or(EigError::NonConvergence { n, max_sweeps })?;
    let (q, t) = schur.unpack();
    let lam: Vec<f64> = (0..n).map(|i| t[(i, i)].re).collect();
    let worst = eigenpair_residual(&h, &lam, &q);
    if worst > 1e-8 * scale {
        return Err(EigError::ResidualTooLarge {
            residual: worst / scale,
            tol: 1e-8,
        });
    }
    Ok((lam, q))
}

/// Apply a real function to a Hermitian matrix through its eigendecomposition.
pub fn hermitian_matfun(a: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix, EigError> {
    let (lam, v) = hermitian_eigen(a)?;
    let d = DMatrix::from_diagonal(&CVector::from_iterator(
        lam.len(),
        lam.iter().map(|&l| C64::new(f(l), 0.0)),
    ));
    Ok(&v * d * v.adjoint())
}

/// Descending singular values.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = nalgebra::SVD::new_unordered(a.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Write a dense complex matrix as CSV with quoted "re,im" cells.
pub fn write_matrix_csv<W: std::io::Write>(a: &CMatrix, mut out: W) -> std::io::Result<()> {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                write!(out, ",")?;
            }
            let z = a[(i, j)];
            write!(out, "\"{:e},{:e}\"", z.re, z.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
