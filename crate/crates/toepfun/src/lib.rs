//! Circulant preconditioning for systems defined by matrix functions of
//! Toeplitz matrices.
//!
//! A 2π-periodic symbol `f` generates the n-by-n Toeplitz matrix `A_n[f]`
//! whose (j,k) entry is the Fourier coefficient `a_{j-k}` of `f`. This crate
//! builds such matrices, forms dense matrix functions `g(A_n[f])` for
//! `g ∈ {exp, sin, cos}` (and generic analytic `h` via truncated Taylor
//! series), and solves
//!
//! ```text
//!     g(A_n[f]) x = b
//! ```
//!
//! with Krylov methods (CG, CG on the normal equations, MINRES, GMRES)
//! preconditioned by `g(c_n[f])`, where `c_n[f]` is the Frobenius-optimal
//! circulant approximation of `A_n[f]`. Because circulants diagonalize in
//! the Fourier basis, `g(c_n[f])^{-1} d` costs a few FFTs — the whole point
//! of the preconditioner. For Hermitian indefinite `g(A_n[f])` the Hermitian
//! positive definite absolute-value circulant `|g(c_n[f])|` is available for
//! MINRES.
//!
//! The preconditioned operators have spectra clustered at 1 (or at ±1 for
//! the absolute-value variant), which the [`analysis`] module measures
//! directly: eigenvalue cluster reports, low-rank-plus-small-norm splits of
//! `g(c) - g(A)`, and norm-bound audits.
//!
//! # Modules
//!
//! - [`genfn`] — generating symbols and their Fourier coefficients, plus the
//!   catalog of experiment symbols (`ex1`..`ex5b`).
//! - [`structured`] — Toeplitz/circulant types, the optimal circulant, FFT
//!   application of `g(C)^{-1}` and `|g(C)|^{-1}`, and the low-rank/small-norm
//!   correction split for trigonometric-polynomial symbols.
//! - [`matfun`] — dense `expm`/`sinm`/`cosm`, truncated Taylor forms and
//!   their error bounds, and Taylor evaluation of generic analytic functions.
//! - [`krylov`] — the iterative solvers and the operator abstraction.
//! - [`analysis`] — spectra, cluster reports, decomposition reports, audits.
//! - [`harness`] — experiment grids: iteration tables, spectrum clouds, and
//!   the verification suite behind the `toepfun` binary.
//!
//! # Quick start
//!
//! ```
//! use toepfun::genfn::catalog;
//! use toepfun::structured::{ToeplitzMatrix, optimal_circulant};
//! use toepfun::matfun::FunctionKind;
//! use toepfun::krylov::{cg, DenseOperator, SolverConfig};
//! use nalgebra::DVector;
//! use num_complex::Complex64;
//!
//! let f = catalog::symbol("ex1").unwrap();
//! let a = ToeplitzMatrix::from_symbol(&f, 64).unwrap();
//! let c = optimal_circulant(&a);
//! let ga = FunctionKind::Exp.of_matrix(&a.to_dense());
//! let m_inv = c.fn_inverse(FunctionKind::Exp).unwrap();
//! let b = DVector::from_element(64, Complex64::new(1.0, 0.0));
//! let report = cg(
//!     &DenseOperator::hermitian_positive_definite(ga),
//!     &b,
//!     Some(&m_inv),
//!     &SolverConfig::default(),
//! )
//! .unwrap();
//! assert!(report.converged);
//! ```
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example` each of
//! them, or use the `toepfun` binary for table/spectrum/verification runs.

pub mod analysis;
pub mod genfn;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod matfun;
pub mod structured;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
