//! Toeplitz and circulant matrices, the optimal circulant preconditioner,
//! absolute-value circulants, and FFT application of circulant functions.
//!
//! # DFT convention
//!
//! One convention is used everywhere: the Fourier matrix is
//! `[F]_{jk} = e^{-2πi jk/n}/√n` and a circulant diagonalizes as
//! `C = F* Λ F`. Consequently the eigenvalues of `C` are the **unnormalized
//! forward DFT of its first column**, and
//!
//! ```text
//!     g(C)^{-1} d  =  F* diag(1/g(λ_j)) F d  =  ifft(fft(d) / g(λ)) / n
//! ```
//!
//! with rustfft's standard sign conventions (forward = e^{-2πi jk/n},
//! inverse = e^{+2πi jk/n}, both unnormalized).

use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::genfn::{fourier_coeffs_default, GenFnError, GeneratingFunction, TrigPoly};
use crate::matfun::FunctionKind;
use crate::{C64, CMatrix, CVector};

#[derive(Debug, Error)]
pub enum StructuredError {
    #[error("dimension mismatch: operator is {expected}, vector is {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "g(λ_{index}) = {value} has modulus {modulus:.3e} at or below the singularity floor {floor:.3e}; \
         the circulant-function preconditioner is invalid for this symbol/size"
    )]
    NearSingularFunctionValue {
        index: usize,
        value: C64,
        modulus: f64,
        floor: f64,
    },
    #[error("correction split needs n > 2M, got n = {n}, M = {degree}")]
    SizeTooSmallForSplit { n: usize, degree: usize },
    #[error(transparent)]
    GenFn(#[from] GenFnError),
}

fn fft_forward(buf: &mut [C64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

fn fft_inverse(buf: &mut [C64]) {
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
}

/// n-by-n complex Toeplitz matrix with entry (j,k) = a_{j-k}.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzMatrix {
    n: usize,
    /// a_{-(n-1)}..a_{n-1}, a_k at index k + (n-1).
    coeffs: Vec<C64>,
}

impl ToeplitzMatrix {
    /// Build from the generating symbol: diagonal coefficients are the
    /// Fourier coefficients of `f`.
    pub fn from_symbol(f: &GeneratingFunction, n: usize) -> Result<Self, StructuredError> {
        Ok(Self {
            n,
            coeffs: fourier_coeffs_default(f, n)?,
        })
    }

    /// Build from explicit diagonal coefficients a_{-(n-1)}..a_{n-1}.
    pub fn from_coeffs(n: usize, coeffs: Vec<C64>) -> Self {
        assert_eq!(coeffs.len(), 2 * n - 1, "need 2n-1 diagonal coefficients");
        Self { n, coeffs }
    }

    /// Exact Toeplitz matrix of a trigonometric polynomial (a_k = ρ_k).
    pub fn from_trig_poly(p: &TrigPoly, n: usize) -> Self {
        let coeffs = (-(n as i64 - 1)..=(n as i64 - 1)).map(|k| p.coeff(k)).collect();
        Self { n, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal coefficient a_k, zero outside |k| ≤ n-1.
    pub fn coeff(&self, k: i64) -> C64 {
        if k.unsigned_abs() as usize >= self.n {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.n as i64 - 1) as usize]
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.coeffs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        (0..self.n as i64).all(|k| (self.coeff(-k) - self.coeff(k).conj()).norm() <= 1e-12 * scale)
    }

    pub fn to_dense(&self) -> CMatrix {
        DMatrix::from_fn(self.n, self.n, |j, k| self.coeff(j as i64 - k as i64))
    }

    /// A·x through embedding in a circulant of the next power-of-two size
    /// ≥ 2n−1 and three FFTs.
    pub fn matvec(&self, x: &CVector) -> Result<CVector, StructuredError> {
        if x.len() != self.n {
            return Err(StructuredError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let n = self.n;
        if n == 1 {
            return Ok(CVector::from_vec(vec![self.coeff(0) * x[0]]));
        }
        let l = (2 * n - 1).next_power_of_two();
        let mut col = vec![C64::new(0.0, 0.0); l];
        for j in 0..n {
            col[j] = self.coeff(j as i64);
        }
        for m in 1..n {
            col[l - m] = self.coeff(-(m as i64));
        }
        let mut xe = vec![C64::new(0.0, 0.0); l];
        xe[..n].copy_from_slice(x.as_slice());
        fft_forward(&mut col);
        fft_forward(&mut xe);
        for (c, v) in col.iter().zip(xe.iter_mut()) {
            *v *= c;
        }
        fft_inverse(&mut xe);
        let scale = 1.0 / l as f64;
        Ok(CVector::from_iterator(n, xe[..n].iter().map(|z| z * scale)))
    }
}

impl Serialize for ToeplitzMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("ToeplitzMatrix", 2)?;
        st.serialize_field("n", &self.n)?;
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|z| [z.re, z.im]).collect();
        st.serialize_field("diag_coeffs", &pairs)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for ToeplitzMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            diag_coeffs: Vec<[f64; 2]>,
        }
        let raw = Raw::deserialize(de)?;
        if raw.n == 0 || raw.diag_coeffs.len() != 2 * raw.n - 1 {
            return Err(serde::de::Error::custom("diag_coeffs must have length 2n-1"));
        }
        Ok(ToeplitzMatrix::from_coeffs(
            raw.n,
            raw.diag_coeffs.iter().map(|p| C64::new(p[0], p[1])).collect(),
        ))
    }
}

/// n-by-n circulant matrix defined by its first column; entry (j,k) is
/// `first_col[(j-k) mod n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CirculantMatrix {
    n: usize,
    first_col: Vec<C64>,
}

impl CirculantMatrix {
    pub fn new(first_col: Vec<C64>) -> Self {
        assert!(!first_col.is_empty());
        Self { n: first_col.len(), first_col }
    }

    /// Synthesize the circulant with the given eigenvalues (inverse DFT of
    /// the eigenvalue vector).
    pub fn from_eigenvalues(eigs: &[C64]) -> Self {
        let n = eigs.len();
        let mut col = eigs.to_vec();
        fft_inverse(&mut col);
        let scale = 1.0 / n as f64;
        for z in &mut col {
            *z *= scale;
        }
        Self { n, first_col: col }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn first_col(&self) -> &[C64] {
        &self.first_col
    }

    /// Eigenvalues λ_j = Σ_k first_col[k] e^{-2πi jk/n}: the unnormalized
    /// forward DFT of the first column.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let mut buf = self.first_col.clone();
        fft_forward(&mut buf);
        buf
    }

    pub fn to_dense(&self) -> CMatrix {
        DMatrix::from_fn(self.n, self.n, |j, k| {
            self.first_col[(j + self.n - k % self.n) % self.n]
        })
    }

    pub fn matvec(&self, x: &CVector) -> Result<CVector, StructuredError> {
        if x.len() != self.n {
            return Err(StructuredError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut col = self.first_col.clone();
        let mut xe = x.as_slice().to_vec();
        fft_forward(&mut col);
        fft_forward(&mut xe);
        for (c, v) in col.iter().zip(xe.iter_mut()) {
            *v *= c;
        }
        fft_inverse(&mut xe);
        let scale = 1.0 / self.n as f64;
        Ok(CVector::from_iterator(self.n, xe.iter().map(|z| z * scale)))
    }

    /// FFT applier for `g(C)^{-1}`. Fails with
    /// [`StructuredError::NearSingularFunctionValue`] if any |g(λ_j)| is at
    /// or below `1e-12 · max_j |g(λ_j)|`.
    pub fn fn_inverse(&self, g: FunctionKind) -> Result<CirculantFnInverse, StructuredError> {
        let values: Vec<C64> = self.eigenvalues().iter().map(|&l| g.apply_scalar(l)).collect();
        let floor = singularity_floor(&values);
        let mut inv = Vec::with_capacity(self.n);
        for (j, &v) in values.iter().enumerate() {
            let m = v.norm();
            if m <= floor {
                return Err(StructuredError::NearSingularFunctionValue {
                    index: j,
                    value: v,
                    modulus: m,
                    floor,
                });
            }
            inv.push(C64::new(1.0, 0.0) / v);
        }
        Ok(CirculantFnInverse { n: self.n, inv_values: inv })
    }

    /// `g(C)^{-1} d` in O(n log n).
    pub fn apply_fn_inv(&self, g: FunctionKind, d: &CVector) -> Result<CVector, StructuredError> {
        self.fn_inverse(g)?.apply(d)
    }

    /// The circulant `g(C)` itself (first column synthesized from g(λ)).
    pub fn apply_fn(&self, g: FunctionKind) -> CirculantMatrix {
        let values: Vec<C64> = self.eigenvalues().iter().map(|&l| g.apply_scalar(l)).collect();
        CirculantMatrix::from_eigenvalues(&values)
    }

    /// FFT applier for the plain inverse C^{-1}, same floor rule as
    /// [`CirculantMatrix::fn_inverse`].
    pub fn inverse(&self) -> Result<CirculantFnInverse, StructuredError> {
        let values = self.eigenvalues();
        let floor = singularity_floor(&values);
        let mut inv = Vec::with_capacity(self.n);
        for (j, &v) in values.iter().enumerate() {
            let m = v.norm();
            if m <= floor {
                return Err(StructuredError::NearSingularFunctionValue {
                    index: j,
                    value: v,
                    modulus: m,
                    floor,
                });
            }
            inv.push(C64::new(1.0, 0.0) / v);
        }
        Ok(CirculantFnInverse { n: self.n, inv_values: inv })
    }
}

impl Serialize for CirculantMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("CirculantMatrix", 2)?;
        st.serialize_field("n", &self.n)?;
        let pairs: Vec<[f64; 2]> = self.first_col.iter().map(|z| [z.re, z.im]).collect();
        st.serialize_field("first_col", &pairs)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for CirculantMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            first_col: Vec<[f64; 2]>,
        }
        let raw = Raw::deserialize(de)?;
        if raw.n == 0 || raw.first_col.len() != raw.n {
            return Err(serde::de::Error::custom("first_col must have length n"));
        }
        Ok(CirculantMatrix::new(
            raw.first_col.iter().map(|p| C64::new(p[0], p[1])).collect(),
        ))
    }
}

fn singularity_floor(values: &[C64]) -> f64 {
    1e-12 * values.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Diagonal-in-Fourier-basis applier for `g(C)^{-1}`.
#[derive(Clone, Debug)]
pub struct CirculantFnInverse {
    n: usize,
    inv_values: Vec<C64>,
}

impl CirculantFnInverse {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Multipliers 1/g(λ_j) in DFT order.
    pub fn inverse_values(&self) -> &[C64] {
        &self.inv_values
    }

    /// Flip the sign of every multiplier: the applier for `(−g(C))^{-1}`.
    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            inv_values: self.inv_values.iter().map(|z| -z).collect(),
        }
    }

    fn sandwich(&self, d: &CVector, conj: bool) -> Result<CVector, StructuredError> {
        if d.len() != self.n {
            return Err(StructuredError::DimensionMismatch {
                expected: self.n,
                got: d.len(),
            });
        }
        let mut buf = d.as_slice().to_vec();
        fft_forward(&mut buf);
        for (v, m) in buf.iter_mut().zip(self.inv_values.iter()) {
            *v *= if conj { m.conj() } else { *m };
        }
        fft_inverse(&mut buf);
        let scale = 1.0 / self.n as f64;
        Ok(CVector::from_iterator(self.n, buf.iter().map(|z| z * scale)))
    }

    /// `F* diag(1/g(λ)) F d`.
    pub fn apply(&self, d: &CVector) -> Result<CVector, StructuredError> {
        self.sandwich(d, false)
    }

    /// Adjoint applier `F* diag(conj(1/g(λ))) F d`.
    pub fn apply_adjoint(&self, d: &CVector) -> Result<CVector, StructuredError> {
        self.sandwich(d, true)
    }

    /// Apply to every column of a dense matrix (n FFT sandwiches).
    pub fn apply_to_columns(&self, a: &CMatrix) -> CMatrix {
        assert_eq!(a.nrows(), self.n, "row count must match the circulant size");
        let fft_f = FftPlanner::new().plan_fft_forward(self.n);
        let fft_i = FftPlanner::new().plan_fft_inverse(self.n);
        let scale = 1.0 / self.n as f64;
        let mut out = a.clone();
        let mut buf = vec![C64::new(0.0, 0.0); self.n];
        for j in 0..a.ncols() {
            for (i, v) in buf.iter_mut().enumerate() {
                *v = out[(i, j)];
            }
            fft_f.process(&mut buf);
            for (v, m) in buf.iter_mut().zip(self.inv_values.iter()) {
                *v *= m;
            }
            fft_i.process(&mut buf);
            for (dst, src) in out.column_mut(j).iter_mut().zip(buf.iter()) {
                *dst = src * scale;
            }
        }
        out
    }
}

/// The absolute-value circulant |g(C)| = (g(C)* g(C))^{1/2}: Hermitian
/// positive definite with eigenvalues |g(λ_j)| in the same Fourier basis.
#[derive(Clone, Debug)]
pub struct AbsCirculant {
    base: CirculantMatrix,
    abs_values: Vec<f64>,
}

impl AbsCirculant {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The circulant g(C) the absolute value was taken of.
    pub fn base(&self) -> &CirculantMatrix {
        &self.base
    }

    /// |g(λ_j)| in DFT order.
    pub fn abs_values(&self) -> &[f64] {
        &self.abs_values
    }

    /// Dense |g(C)| (for oracles and analysis).
    pub fn to_dense(&self) -> CMatrix {
        let eigs: Vec<C64> = self.abs_values.iter().map(|&a| C64::new(a, 0.0)).collect();
        CirculantMatrix::from_eigenvalues(&eigs).to_dense()
    }

    /// FFT applier for |g(C)|^{-1} (self-adjoint).
    pub fn inverse(&self) -> CirculantFnInverse {
        CirculantFnInverse {
            n: self.base.dim(),
            inv_values: self.abs_values.iter().map(|&a| C64::new(1.0 / a, 0.0)).collect(),
        }
    }

    /// FFT applier for |g(C)|^{-1/2}, the similarity that symmetrizes
    /// |g(C)|^{-1} g(A) when g(A) is Hermitian.
    pub fn inverse_sqrt(&self) -> CirculantFnInverse {
        CirculantFnInverse {
            n: self.base.dim(),
            inv_values: self.abs_values.iter().map(|&a| C64::new(1.0 / a.sqrt(), 0.0)).collect(),
        }
    }

    pub fn apply_inverse(&self, d: &CVector) -> Result<CVector, StructuredError> {
        self.inverse().apply(d)
    }
}

/// |g(C)| with the same singularity-floor precondition as
/// [`CirculantMatrix::fn_inverse`].
pub fn abs_circulant_fn(c: &CirculantMatrix, g: FunctionKind) -> Result<AbsCirculant, StructuredError> {
    let values: Vec<C64> = c.eigenvalues().iter().map(|&l| g.apply_scalar(l)).collect();
    let floor = singularity_floor(&values);
    let mut abs_values = Vec::with_capacity(values.len());
    for (j, &v) in values.iter().enumerate() {
        let m = v.norm();
        if m <= floor {
            return Err(StructuredError::NearSingularFunctionValue {
                index: j,
                value: v,
                modulus: m,
                floor,
            });
        }
        abs_values.push(m);
    }
    Ok(AbsCirculant {
        base: CirculantMatrix::from_eigenvalues(&values),
        abs_values,
    })
}

/// The optimal circulant preconditioner of `A`: the circulant minimizing the
/// Frobenius distance to `A`, with first column
/// `c_k = ((n-k) a_k + k a_{k-n}) / n`.
pub fn optimal_circulant(a: &ToeplitzMatrix) -> CirculantMatrix {
    let n = a.dim();
    let first_col = (0..n)
        .map(|k| {
            let k_i = k as i64;
            let n_f = n as f64;
            (a.coeff(k_i) * (n as f64 - k as f64) + a.coeff(k_i - n as i64) * k as f64) / n_f
        })
        .collect();
    CirculantMatrix::new(first_col)
}

/// The exact split `c_n[p] − A_n[p] = U − W` for a trigonometric polynomial
/// of degree M and n > 2M: `U` carries the two M×M corner triangles with
/// entries ((n−m)/n)·ρ_{±m} (rank ≤ 2M), `W` is the banded part with entries
/// (m/n)·ρ_{±m} (norm O(M²/n)).
pub fn split_correction(p: &TrigPoly, n: usize) -> Result<(CMatrix, CMatrix), StructuredError> {
    let m = p.degree();
    if n <= 2 * m {
        return Err(StructuredError::SizeTooSmallForSplit { n, degree: m });
    }
    let mut u = DMatrix::zeros(n, n);
    let mut w = DMatrix::zeros(n, n);
    for d in 1..=m {
        let corner = (n - d) as f64 / n as f64;
        let band = d as f64 / n as f64;
        let rho_pos = p.coeff(d as i64);
        let rho_neg = p.coeff(-(d as i64));
        for j in 0..d {
            // top-right: column k = j + n - d, offset j-k = d-n
            u[(j, j + n - d)] = rho_pos * corner;
            // bottom-left: row j+n-d, offset n-d
            u[(j + n - d, j)] = rho_neg * corner;
        }
        for j in 0..n - d {
            // sub-diagonal j-k = d and super-diagonal j-k = -d
            w[(j + d, j)] = rho_pos * band;
            w[(j, j + d)] = rho_neg * band;
        }
    }
    Ok((u, w))
}
