//! Dense matrix functions: exponential, sine, cosine, truncated Taylor
//! approximations with computable error bounds, and Taylor evaluation of
//! generic analytic functions.
//!
//! The exponential uses scaling and squaring with a degree-16 truncated
//! Taylor evaluation (Paterson–Stockmeyer form): `A` is scaled by
//! `s = 2^⌈log₂‖A‖₁⌉` (clamped to ≥ 1) so the series converges to roundoff,
//! then the result is squared back up. Sine and cosine are derived from the
//! exponential identities
//!
//! ```text
//!     sin A = (e^{iA} − e^{-iA}) / 2i,     cos A = (e^{iA} + e^{-iA}) / 2,
//! ```
//!
//! so every trigonometric path exercises the one tested kernel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, EigError};
use crate::{C64, CMatrix};

#[derive(Debug, Error)]
pub enum MatFunError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),
    #[error(
        "spectral radius ρ(A − αI) = {rho:.6} is not inside the convergence radius {radius:.6}"
    )]
    RadiusViolation { rho: f64, radius: f64 },
    #[error("perturbation gap {gap:.6e} exceeds the bound {bound:.6e}")]
    PerturbationBoundViolated { gap: f64, bound: f64 },
    #[error(transparent)]
    Eig(#[from] EigError),
}

/// The matrix functions with circulant-preconditioner support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Exp,
    Sin,
    Cos,
}

impl FunctionKind {
    pub fn apply_scalar(self, z: C64) -> C64 {
        match self {
            FunctionKind::Exp => z.exp(),
            FunctionKind::Sin => z.sin(),
            FunctionKind::Cos => z.cos(),
        }
    }

    pub fn of_matrix(self, a: &CMatrix) -> CMatrix {
        apply(self, a).expect("finite input matrix")
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Exp => "exp",
            FunctionKind::Sin => "sin",
            FunctionKind::Cos => "cos",
        }
    }
}

impl std::str::FromStr for FunctionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp" => Ok(FunctionKind::Exp),
            "sin" => Ok(FunctionKind::Sin),
            "cos" => Ok(FunctionKind::Cos),
            other => Err(format!("unknown matrix function {other:?} (exp, sin, cos)")),
        }
    }
}

impl std::fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// g(A) for g ∈ {exp, sin, cos}.
pub fn apply(g: FunctionKind, a: &CMatrix) -> Result<CMatrix, MatFunError> {
    match g {
        FunctionKind::Exp => expm(a),
        FunctionKind::Sin => sinm(a),
        FunctionKind::Cos => cosm(a),
    }
}

const TAYLOR_DEGREE: usize = 16;

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Degree-16 Taylor polynomial of e^B in Paterson–Stockmeyer form
/// (7 multiplications instead of 16).
fn exp_taylor16(b: &CMatrix) -> CMatrix {
    let n = b.nrows();
    let coeff = |i: usize| C64::new(1.0 / factorial(i), 0.0);
    let b2 = b * b;
    let b3 = &b2 * b;
    let b4 = &b3 * b;
    let eye = CMatrix::identity(n, n);
    let block = |j: usize| -> CMatrix {
        &eye * coeff(4 * j) + b * coeff(4 * j + 1) + &b2 * coeff(4 * j + 2) + &b3 * coeff(4 * j + 3)
    };
    let mut p = &eye * coeff(TAYLOR_DEGREE); // the lone degree-16 block
    for j in (0..4).rev() {
        p = p * &b4 + block(j);
    }
    p
}

/// Matrix exponential by scaling and squaring over the degree-16 Taylor
/// kernel.
pub fn expm(a: &CMatrix) -> Result<CMatrix, MatFunError> {
    if !linalg::all_finite(a) {
        return Err(MatFunError::NonFinite);
    }
    let norm1 = linalg::norm1(a);
    let squarings = if norm1 <= 1.0 {
        0
    } else {
        norm1.log2().ceil() as u32
    };
    let scale = C64::new((0.5f64).powi(squarings as i32), 0.0);
    let mut p = exp_taylor16(&(a * scale));
    for _ in 0..squarings {
        p = &p * &p;
    }
    Ok(p)
}

/// sin A via the exponential identity.
pub fn sinm(a: &CMatrix) -> Result<CMatrix, MatFunError> {
    let i = C64::new(0.0, 1.0);
    let e_pos = expm(&(a * i))?;
    let e_neg = expm(&(a * (-i)))?;
    Ok((e_pos - e_neg) * (C64::new(1.0, 0.0) / (C64::new(0.0, 2.0))))
}

/// cos A via the exponential identity.
pub fn cosm(a: &CMatrix) -> Result<CMatrix, MatFunError> {
    let i = C64::new(0.0, 1.0);
    let e_pos = expm(&(a * i))?;
    let e_neg = expm(&(a * (-i)))?;
    Ok((e_pos + e_neg) * C64::new(0.5, 0.0))
}

/// The truncated form `P_{r,s} = [Σ_{i=0}^{r} (1/i!)(A/s)^i]^s`, which
/// approaches e^A as r or s grows; see [`taylor_exp_error_bound`] for the
/// guaranteed accuracy.
pub fn taylor_exp(a: &CMatrix, r: usize, s: usize) -> CMatrix {
    assert!(r >= 1 && s >= 1, "taylor_exp needs r, s >= 1");
    let n = a.nrows();
    let b = a * C64::new(1.0 / s as f64, 0.0);
    // Horner evaluation of the inner degree-r sum
    let mut inner = CMatrix::identity(n, n) * C64::new(1.0 / factorial(r), 0.0);
    for i in (0..r).rev() {
        inner = inner * &b + CMatrix::identity(n, n) * C64::new(1.0 / factorial(i), 0.0);
    }
    // inner^s by binary powering
    let mut result = CMatrix::identity(n, n);
    let mut base = inner;
    let mut e = s;
    while e > 0 {
        if e & 1 == 1 {
            result = result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `‖e^A − P_{r,s}‖ ≤ ‖A‖^{r+1} / (s^r (r+1)!) · e^{‖A‖}` for any consistent
/// norm; evaluate with the 2-norm of A.
pub fn taylor_exp_error_bound(norm_a: f64, r: usize, s: usize) -> f64 {
    norm_a.powi(r as i32 + 1) / ((s as f64).powi(r as i32) * factorial(r + 1)) * norm_a.exp()
}

/// A scalar analytic function given by its Taylor series around `center`
/// with convergence radius `radius` (possibly infinite).
#[derive(Clone, Debug)]
pub struct TaylorSpec {
    pub center: C64,
    pub coeffs: Vec<C64>,
    pub radius: f64,
}

impl TaylorSpec {
    pub fn new(center: C64, coeffs: Vec<C64>, radius: f64) -> Self {
        assert!(radius > 0.0, "convergence radius must be positive");
        assert!(
            coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
            "Taylor coefficients must be finite"
        );
        Self { center, coeffs, radius }
    }

    /// e^z around 0 with the given number of stored coefficients.
    pub fn exp(terms: usize) -> Self {
        Self::new(
            C64::new(0.0, 0.0),
            (0..terms).map(|k| C64::new(1.0 / factorial(k), 0.0)).collect(),
            f64::INFINITY,
        )
    }

    /// 1/(1−z) around 0, radius 1.
    pub fn geometric(terms: usize) -> Self {
        Self::new(C64::new(0.0, 0.0), vec![C64::new(1.0, 0.0); terms], 1.0)
    }

    fn coeff(&self, k: usize) -> Option<C64> {
        self.coeffs.get(k).copied()
    }
}

/// Result of a truncated Taylor evaluation of h(A).
#[derive(Clone, Debug)]
pub struct TaylorMatFun {
    /// Partial sum Σ_{k=0}^{K-1} a_k (A − αI)^k.
    pub value: CMatrix,
    /// Geometric remainder proxy ‖a_K (A−αI)^K‖₂ / (1 − ‖A−αI‖₂/radius), or
    /// None when ‖A−αI‖₂ ≥ radius or a_K is not stored ("bound unavailable").
    pub remainder_bound: Option<f64>,
}

/// Evaluate the K-term Taylor partial sum of h(A). The convergence
/// precondition ρ(A − αI) < radius is checked against the dense eigenvalues.
pub fn taylor_matfun(h: &TaylorSpec, a: &CMatrix, terms: usize) -> Result<TaylorMatFun, MatFunError> {
    assert!(terms >= 1, "need at least one Taylor term");
    if !linalg::all_finite(a) {
        return Err(MatFunError::NonFinite);
    }
    let n = a.nrows();
    let x = a - CMatrix::identity(n, n) * h.center;
    let rho = linalg::eigenvalues(&x)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if rho >= h.radius {
        return Err(MatFunError::RadiusViolation { rho, radius: h.radius });
    }
    let k_used = terms.min(h.coeffs.len());
    let mut value = CMatrix::identity(n, n) * h.coeff(k_used - 1).unwrap_or_default();
    for k in (0..k_used - 1).rev() {
        value = value * &x + CMatrix::identity(n, n) * h.coeff(k).unwrap_or_default();
    }
    let remainder_bound = h.coeff(k_used).and_then(|a_k| {
        let rho_hat = linalg::norm2(&x) / h.radius;
        if rho_hat < 1.0 {
            let mut xk = CMatrix::identity(n, n);
            let mut base = x.clone();
            let mut e = k_used;
            while e > 0 {
                if e & 1 == 1 {
                    xk = xk * &base;
                }
                e >>= 1;
                if e > 0 {
                    base = &base * &base;
                }
            }
            Some(linalg::norm2(&(xk * a_k)) / (1.0 - rho_hat))
        } else {
            None
        }
    });
    Ok(TaylorMatFun { value, remainder_bound })
}

/// ‖e^A − e^B‖₂, checked against the perturbation bound
/// ‖A − B‖₂ · e^{max(‖A‖₂, ‖B‖₂)} (+1e-8 slack). A violation is returned as
/// a typed error rather than silently ignored.
pub fn expm_perturbation_gap(a: &CMatrix, b: &CMatrix) -> Result<f64, MatFunError> {
    if a.nrows() != b.nrows() {
        return Err(MatFunError::DimensionMismatch(a.nrows(), b.nrows()));
    }
    let gap = linalg::norm2(&(expm(a)? - expm(b)?));
    let bound = linalg::norm2(&(a - b)) * linalg::norm2(a).max(linalg::norm2(b)).exp();
    if gap > bound + 1e-8 {
        return Err(MatFunError::PerturbationBoundViolated { gap, bound });
    }
    Ok(gap)
}
