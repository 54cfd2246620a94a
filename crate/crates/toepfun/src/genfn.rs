//! Generating symbols and their Fourier coefficients.
//!
//! A symbol is a 2π-periodic complex-valued function on [−π, π). Its Fourier
//! coefficients
//!
//! ```text
//!     a_k = (1/2π) ∫_{-π}^{π} f(θ) e^{-ikθ} dθ
//! ```
//!
//! populate the diagonals of the Toeplitz matrices built in
//! [`crate::structured`]. Coefficients are computed by sampling the symbol on
//! a uniform grid of S points (S a power of two, S ≥ max(4n, 4096)) and one
//! forward FFT, which for a periodic integrand coincides with the S-point
//! composite trapezoid rule. Trigonometric polynomials of degree < n come out
//! exactly, up to roundoff.
//!
//! Symbols defined by non-periodic formulas (e.g. `θ cos θ`) are taken as
//! their periodic extension from [−π, π); arguments are reduced into that
//! interval before every evaluation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::FftPlanner;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::C64;

/// Grid used for the supremum-norm estimate stored in every symbol.
pub const DEFAULT_SUP_GRID: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum GenFnError {
    #[error("matrix dimension must be at least 1")]
    ZeroDimension,
    #[error("oversample factor must be at least 1")]
    ZeroOversample,
    #[error("symbol evaluated to a non-finite value at θ = {theta}")]
    NonFiniteSample { theta: f64 },
    #[error("sup-norm grid must have at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("unknown symbol name {0:?} (catalog: ex1, ex2, ex3, ex4, ex5a, ex5b)")]
    UnknownSymbol(String),
}

/// Reduce θ into [−π, π).
pub fn reduce_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// Finite trigonometric polynomial `p(θ) = Σ_{|k| ≤ M} ρ_k e^{ikθ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    degree: usize,
    /// Coefficients ρ_{-M}..ρ_M, indexed by k + M.
    coeffs: Vec<C64>,
}

impl TrigPoly {
    /// Build from (k, ρ_k) pairs; unlisted coefficients are zero.
    pub fn new(pairs: &[(i64, C64)]) -> Self {
        let degree = pairs.iter().map(|&(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * degree + 1];
        for &(k, rho) in pairs {
            coeffs[(k + degree as i64) as usize] += rho;
        }
        Self { degree, coeffs }
    }

    /// Build from a dense coefficient slice ρ_{-M}..ρ_M.
    pub fn from_coeffs(coeffs: Vec<C64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient slice must have odd length");
        let degree = coeffs.len() / 2;
        Self { degree, coeffs }
    }

    pub fn constant(c: C64) -> Self {
        Self { degree: 0, coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// ρ_k, zero outside |k| ≤ M.
    pub fn coeff(&self, k: i64) -> C64 {
        if k.unsigned_abs() as usize > self.degree {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.degree as i64) as usize]
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn eval(&self, theta: f64) -> C64 {
        let theta = reduce_angle(theta);
        let m = self.degree as i64;
        let mut acc = C64::new(0.0, 0.0);
        for k in -m..=m {
            let phase = C64::from_polar(1.0, k as f64 * theta);
            acc += self.coeff(k) * phase;
        }
        acc
    }

    /// Real-valued on ℝ iff ρ_{-k} = conj(ρ_k) for all k.
    pub fn is_real_valued(&self) -> bool {
        let scale = self.coeffs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        (0..=self.degree as i64)
            .all(|k| (self.coeff(-k) - self.coeff(k).conj()).norm() <= 1e-12 * scale)
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone)]
enum SymbolKind {
    Sampled(Arc<dyn Fn(f64) -> C64 + Send + Sync>),
    TrigPoly(TrigPoly),
}

/// A generating symbol: either a closed-form sampled function or a finite
/// trigonometric polynomial, together with a supremum-norm estimate taken on
/// the default grid at construction.
#[derive(Clone)]
pub struct GeneratingFunction {
    kind: SymbolKind,
    name: Option<String>,
    sup_norm_estimate: f64,
    real_valued: bool,
}

impl fmt::Debug for GeneratingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratingFunction")
            .field("name", &self.name)
            .field(
                "kind",
                &match &self.kind {
                    SymbolKind::Sampled(_) => "sampled".to_string(),
                    SymbolKind::TrigPoly(p) => format!("trigpoly(M={})", p.degree()),
                },
            )
            .field("sup_norm_estimate", &self.sup_norm_estimate)
            .field("real_valued", &self.real_valued)
            .finish()
    }
}

impl GeneratingFunction {
    pub fn from_trig_poly(p: TrigPoly) -> Self {
        let (sup, max_im) = grid_extremes(|t| p.eval(t), DEFAULT_SUP_GRID);
        let real = p.is_real_valued() && max_im <= 1e-10 * sup.max(1.0);
        Self {
            kind: SymbolKind::TrigPoly(p),
            name: None,
            sup_norm_estimate: sup,
            real_valued: real,
        }
    }

    pub fn from_fn(f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        let (sup, max_im) = grid_extremes(&f, DEFAULT_SUP_GRID);
        Self {
            kind: SymbolKind::Sampled(Arc::new(f)),
            name: None,
            sup_norm_estimate: sup,
            real_valued: max_im <= 1e-12 * sup.max(1.0),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Evaluate at θ after reduction into [−π, π).
    pub fn eval(&self, theta: f64) -> C64 {
        let theta = reduce_angle(theta);
        match &self.kind {
            SymbolKind::Sampled(f) => f(theta),
            SymbolKind::TrigPoly(p) => p.eval(theta),
        }
    }

    /// Supremum-norm estimate from the construction-time grid.
    pub fn sup_norm_estimate(&self) -> f64 {
        self.sup_norm_estimate
    }

    /// Whether the symbol is real-valued on the sampling grid. Real symbols
    /// give Hermitian Toeplitz matrices.
    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn as_trig_poly(&self) -> Option<&TrigPoly> {
        match &self.kind {
            SymbolKind::TrigPoly(p) => Some(p),
            SymbolKind::Sampled(_) => None,
        }
    }
}

fn grid_extremes(f: impl Fn(f64) -> C64, grid: usize) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut max_im = 0.0f64;
    for j in 0..grid {
        let theta = -PI + 2.0 * PI * j as f64 / grid as f64;
        let z = f(theta);
        sup = sup.max(z.norm());
        max_im = max_im.max(z.im.abs());
    }
    (sup, max_im)
}

/// max |f(θ_j)| over a uniform grid of [−π, π).
pub fn sup_norm(f: &GeneratingFunction, grid_size: usize) -> Result<f64, GenFnError> {
    if grid_size < 2 {
        return Err(GenFnError::GridTooSmall(grid_size));
    }
    let mut sup = 0.0f64;
    for j in 0..grid_size {
        let theta = -PI + 2.0 * PI * j as f64 / grid_size as f64;
        let z = f.eval(theta);
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(GenFnError::NonFiniteSample { theta });
        }
        sup = sup.max(z.norm());
    }
    Ok(sup)
}

/// Fourier coefficients a_{-(n-1)}..a_{n-1} of `f`, by uniform sampling at
/// S = next_power_of_two(max(oversample·(2n−1), 4n, 4096)) points and one FFT.
///
/// Returned in a flat vector of length 2n−1 with a_k at index k + (n−1).
pub fn fourier_coeffs(
    f: &GeneratingFunction,
    n: usize,
    oversample: usize,
) -> Result<Vec<C64>, GenFnError> {
    if n == 0 {
        return Err(GenFnError::ZeroDimension);
    }
    if oversample == 0 {
        return Err(GenFnError::ZeroOversample);
    }
    let s = oversample
        .saturating_mul(2 * n - 1)
        .max(4 * n)
        .max(4096)
        .next_power_of_two();
    let mut samples = Vec::with_capacity(s);
    for j in 0..s {
        let theta = -PI + 2.0 * PI * j as f64 / s as f64;
        let z = f.eval(theta);
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(GenFnError::NonFiniteSample { theta });
        }
        samples.push(z);
    }
    let fft = FftPlanner::new().plan_fft_forward(s);
    fft.process(&mut samples);
    // Sampling starts at θ = −π, so bin k carries the extra phase e^{ikπ}.
    let mut out = Vec::with_capacity(2 * n - 1);
    for k in -(n as i64 - 1)..=(n as i64 - 1) {
        let bin = k.rem_euclid(s as i64) as usize;
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        out.push(samples[bin] * (sign / s as f64));
    }
    Ok(out)
}

/// [`fourier_coeffs`] with the default oversampling (S = next_pow2(max(4n, 4096))).
pub fn fourier_coeffs_default(f: &GeneratingFunction, n: usize) -> Result<Vec<C64>, GenFnError> {
    fourier_coeffs(f, n, 2)
}

/// Symbol reference: a catalog name or an inline trigonometric polynomial.
///
/// Serializes as a bare string (`"ex1"`) or as
/// `{"kind":"trigpoly","coeffs":[[k, re, im], ...]}`.
#[derive(Clone, Debug, PartialEq)]
pub enum SymbolSpec {
    Named(String),
    TrigPoly(Vec<(i64, f64, f64)>),
}

impl SymbolSpec {
    pub fn resolve(&self) -> Result<GeneratingFunction, GenFnError> {
        match self {
            SymbolSpec::Named(name) => catalog::symbol(name),
            SymbolSpec::TrigPoly(pairs) => {
                let pairs: Vec<(i64, C64)> = pairs
                    .iter()
                    .map(|&(k, re, im)| (k, C64::new(re, im)))
                    .collect();
                Ok(GeneratingFunction::from_trig_poly(TrigPoly::new(&pairs)).with_name("trigpoly"))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            SymbolSpec::Named(name) => name.clone(),
            SymbolSpec::TrigPoly(pairs) => format!("trigpoly[{}]", pairs.len()),
        }
    }
}

impl Serialize for SymbolSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            SymbolSpec::Named(name) => ser.serialize_str(name),
            SymbolSpec::TrigPoly(pairs) => {
                #[derive(Serialize)]
                struct Inline<'a> {
                    kind: &'static str,
                    coeffs: &'a [(i64, f64, f64)],
                }
                Inline { kind: "trigpoly", coeffs: pairs }.serialize(ser)
            }
        }
    }
}

impl<'de> Deserialize<'de> for SymbolSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Named(String),
            Inline { kind: String, coeffs: Vec<(i64, f64, f64)> },
        }
        match Raw::deserialize(de)? {
            Raw::Named(name) => Ok(SymbolSpec::Named(name)),
            Raw::Inline { kind, coeffs } => {
                if kind != "trigpoly" {
                    return Err(D::Error::custom(format!("unknown symbol kind {kind:?}")));
                }
                Ok(SymbolSpec::TrigPoly(coeffs))
            }
        }
    }
}

/// The six experiment symbols.
pub mod catalog {
    use super::*;

    pub const NAMES: [&str; 6] = ["ex1", "ex2", "ex3", "ex4", "ex5a", "ex5b"];

    /// Look up one experiment symbol by name.
    pub fn symbol(name: &str) -> Result<GeneratingFunction, GenFnError> {
        let f = match name {
            // (4/3)·θ·cos θ
            "ex1" => GeneratingFunction::from_fn(|t| C64::new(4.0 / 3.0 * t * t.cos(), 0.0)),
            // 2θ·cos θ + θi
            "ex2" => GeneratingFunction::from_fn(|t| C64::new(2.0 * t * t.cos(), t)),
            // −(θ²/2π + 10⁻³)
            "ex3" => {
                GeneratingFunction::from_fn(|t| C64::new(-(t * t / (2.0 * PI) + 1e-3), 0.0))
            }
            // −(θ²/2π·i + 10⁻³)
            "ex4" => {
                GeneratingFunction::from_fn(|t| C64::new(-1e-3, -(t * t) / (2.0 * PI)))
            }
            // (π/2 − 10⁻⁴)·cos(θ²) − π/4
            "ex5a" => GeneratingFunction::from_fn(|t| {
                C64::new((PI / 2.0 - 1e-4) * (t * t).cos() - PI / 4.0, 0.0)
            }),
            // (π/2 − 10⁻⁴)·cos(θ²) + (θ/π)i
            "ex5b" => GeneratingFunction::from_fn(|t| {
                C64::new((PI / 2.0 - 1e-4) * (t * t).cos(), t / PI)
            }),
            other => return Err(GenFnError::UnknownSymbol(other.to_string())),
        };
        Ok(f.with_name(name))
    }

    /// All six symbols in catalog order.
    pub fn all() -> Vec<GeneratingFunction> {
        NAMES.iter().map(|n| symbol(n).expect("catalog")).collect()
    }
}
