//! Krylov solvers — CG, CG on the normal equations, MINRES, GMRES — over an
//! operator abstraction, with optional circulant-function preconditioning.
//!
//! Conventions shared by all four solvers:
//!
//! - the initial guess is always the zero vector, so every residual history
//!   starts at 1;
//! - the stopping rule is a relative residual below `tol` (default 1e-7),
//!   capped at `max_iter` (default 100000) iterations;
//! - CG and MINRES converge on the **true** residual of the original system,
//!   recomputed from the iterate rather than trusted from the recurrence;
//!   CGNR converges on the normal-equations residual and reports the
//!   original-system residual separately; GMRES converges on the
//!   left-preconditioned residual;
//! - running out of iterations is not an error: it yields a report with
//!   `converged = false`. Errors are structural (wrong dimensions, an
//!   indefinite operator handed to CG, a non-HPD preconditioner handed to
//!   MINRES, a singular Hessenberg block in GMRES).

use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::structured::CirculantFnInverse;
use crate::{C64, CMatrix, CVector};

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("dimension mismatch: operator is {expected}, vector is {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not Hermitian positive definite: {detail}")]
    IndefinitenessDetected { detail: String },
    #[error("operator failed the Hermitian probe: |Im⟨x,Ax⟩| = {imag:.3e} vs scale {scale:.3e}")]
    OperatorNotHermitian { imag: f64, scale: f64 },
    #[error("preconditioner is not Hermitian positive definite: ⟨d, M⁻¹d⟩ = {quad}")]
    PreconditionerNotHPD { quad: C64 },
    #[error("GMRES Hessenberg system is singular at column {column}")]
    BreakdownHessenbergSingular { column: usize },
}

/// A linear map on ℂⁿ. `apply` must be linear; `apply_adjoint` must implement
/// the conjugate-transpose map (needed by the normal-equations solver).
/// The Hermitian/positive-definite flags are caller-asserted and only
/// spot-checked by the solvers that rely on them.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CVector) -> CVector;
    fn apply_adjoint(&self, x: &CVector) -> CVector;
    fn is_hermitian(&self) -> bool {
        false
    }
    fn is_positive_definite(&self) -> bool {
        false
    }
}

/// Dense matrix operator.
pub struct DenseOperator {
    matrix: CMatrix,
    hermitian: bool,
    positive_definite: bool,
}

impl DenseOperator {
    pub fn new(matrix: CMatrix, hermitian: bool, positive_definite: bool) -> Self {
        Self { matrix, hermitian, positive_definite }
    }

    pub fn general(matrix: CMatrix) -> Self {
        Self::new(matrix, false, false)
    }

    pub fn hermitian(matrix: CMatrix) -> Self {
        Self::new(matrix, true, false)
    }

    pub fn hermitian_positive_definite(matrix: CMatrix) -> Self {
        Self::new(matrix, true, true)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &CVector) -> CVector {
        assert_eq!(x.len(), self.dim());
        &self.matrix * x
    }
    fn apply_adjoint(&self, x: &CVector) -> CVector {
        assert_eq!(x.len(), self.dim());
        self.matrix.ad_mul(x)
    }
    fn is_hermitian(&self) -> bool {
        self.hermitian
    }
    fn is_positive_definite(&self) -> bool {
        self.positive_definite
    }
}

impl LinearOperator for CirculantFnInverse {
    fn dim(&self) -> usize {
        CirculantFnInverse::dim(self)
    }
    fn apply(&self, x: &CVector) -> CVector {
        CirculantFnInverse::apply(self, x).expect("dimension checked by solver")
    }
    fn apply_adjoint(&self, x: &CVector) -> CVector {
        CirculantFnInverse::apply_adjoint(self, x).expect("dimension checked by solver")
    }
    fn is_hermitian(&self) -> bool {
        let scale = self.inverse_values().iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.inverse_values().iter().all(|z| z.im.abs() <= 1e-10 * scale)
    }
    fn is_positive_definite(&self) -> bool {
        self.is_hermitian() && self.inverse_values().iter().all(|z| z.re > 0.0)
    }
}

/// outer ∘ inner (left preconditioning: outer = M⁻¹, inner = G).
pub struct ComposedOperator<'a> {
    pub outer: &'a dyn LinearOperator,
    pub inner: &'a dyn LinearOperator,
}

impl LinearOperator for ComposedOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &CVector) -> CVector {
        self.outer.apply(&self.inner.apply(x))
    }
    fn apply_adjoint(&self, x: &CVector) -> CVector {
        self.inner.apply_adjoint(&self.outer.apply_adjoint(x))
    }
}

/// B*B for a base operator B: Hermitian positive semidefinite by construction.
pub struct NormalEquationsOperator<'a> {
    pub base: &'a dyn LinearOperator,
}

impl LinearOperator for NormalEquationsOperator<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, x: &CVector) -> CVector {
        self.base.apply_adjoint(&self.base.apply(x))
    }
    fn apply_adjoint(&self, x: &CVector) -> CVector {
        self.apply(x)
    }
    fn is_hermitian(&self) -> bool {
        true
    }
    fn is_positive_definite(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Cg,
    Cgnr,
    Minres,
    Gmres,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Cg => "cg",
            SolverKind::Cgnr => "cgnr",
            SolverKind::Minres => "minres",
            SolverKind::Gmres => "gmres",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    None,
    CirculantFn,
    AbsCirculantFn,
}

impl PreconditionerKind {
    pub fn name(self) -> &'static str {
        match self {
            PreconditionerKind::None => "none",
            PreconditionerKind::CirculantFn => "circulant_fn",
            PreconditionerKind::AbsCirculantFn => "abs_circulant_fn",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: SolverKind,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100_000,
            solver: SolverKind::Cg,
            preconditioner: PreconditionerKind::None,
        }
    }
}

fn serialize_duration_secs<S: Serializer>(d: &Duration, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_f64(d.as_secs_f64())
}

/// What a solve did: iteration count, convergence flag, residual history
/// (entry 0 is the zero initial guess), and the recomputed final relative
/// residual of the system the solver stops on.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub solver: String,
    pub preconditioner: String,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub relres_final: f64,
    /// For CGNR: ‖b − Gx‖/‖b‖ of the original (non-normal) system.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_system_relres: Option<f64>,
    #[serde(serialize_with = "serialize_duration_secs")]
    pub wall_time: Duration,
}

impl SolveReport {
    /// Equality of everything except wall time, for determinism checks.
    pub fn same_numbers(&self, other: &SolveReport) -> bool {
        self.solver == other.solver
            && self.preconditioner == other.preconditioner
            && self.iterations == other.iterations
            && self.converged == other.converged
            && self.residual_history == other.residual_history
            && self.relres_final == other.relres_final
            && self.original_system_relres == other.original_system_relres
    }
}

/// Solution vector plus its report.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: CVector,
    pub report: SolveReport,
}

fn check_dims(op: &dyn LinearOperator, b: &CVector) -> Result<(), KrylovError> {
    if op.dim() != b.len() {
        return Err(KrylovError::DimensionMismatch { expected: op.dim(), got: b.len() });
    }
    Ok(())
}

fn probe_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x746f_6570)
}

fn random_probe(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

/// ⟨x, Ax⟩ spot-check: Hermitian (imaginary part at roundoff) and, when
/// `require_pd`, positive.
fn spot_check_hpd(
    op: &dyn LinearOperator,
    require_pd: bool,
    what: &str,
) -> Result<(), KrylovError> {
    let mut rng = probe_rng();
    for _ in 0..3 {
        let x = random_probe(op.dim(), &mut rng);
        let ax = op.apply(&x);
        let quad = x.dotc(&ax);
        let scale = x.norm() * ax.norm();
        if quad.im.abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            if what == "preconditioner" {
                return Err(KrylovError::PreconditionerNotHPD { quad });
            }
            return Err(KrylovError::OperatorNotHermitian { imag: quad.im.abs(), scale });
        }
        if require_pd && quad.re <= 0.0 {
            if what == "preconditioner" {
                return Err(KrylovError::PreconditionerNotHPD { quad });
            }
            return Err(KrylovError::IndefinitenessDetected {
                detail: format!("probe gave ⟨x,Ax⟩ = {quad}"),
            });
        }
    }
    Ok(())
}

fn trivial_outcome(n: usize, solver: &str, prec: &str, t0: Instant) -> SolveOutcome {
    SolveOutcome {
        x: CVector::zeros(n),
        report: SolveReport {
            solver: solver.into(),
            preconditioner: prec.into(),
            iterations: 0,
            converged: true,
            residual_history: vec![0.0],
            relres_final: 0.0,
            original_system_relres: None,
            wall_time: t0.elapsed(),
        },
    }
}

fn real_scalar(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Preconditioned conjugate gradients core (probes already done by callers).
fn cg_core(
    a: &dyn LinearOperator,
    b: &CVector,
    m_inv: Option<&dyn LinearOperator>,
    tol: f64,
    max_iter: usize,
    solver: &str,
    prec: &str,
) -> Result<SolveOutcome, KrylovError> {
    let t0 = Instant::now();
    let n = b.len();
    let norm_b = b.norm();
    if norm_b == 0.0 {
        return Ok(trivial_outcome(n, solver, prec, t0));
    }
    let mut x = CVector::zeros(n);
    let mut r = b.clone();
    let mut z = match m_inv {
        Some(m) => m.apply(&r),
        None => r.clone(),
    };
    let mut p = z.clone();
    let mut rho = r.dotc(&z);
    let mut history = vec![1.0];
    let mut converged = false;
    let mut relres_final = 1.0;

    for _ in 0..max_iter {
        let q = a.apply(&p);
        let den = p.dotc(&q);
        if den.re <= 0.0 {
            return Err(KrylovError::IndefinitenessDetected {
                detail: format!("⟨p, Ap⟩ = {den} during iteration {}", history.len()),
            });
        }
        let alpha = rho / den;
        x += &p * alpha;
        r -= &q * alpha;
        let relres = r.norm() / norm_b;
        history.push(relres);
        if relres < tol {
            // accept only if the true residual agrees
            let true_relres = (b - a.apply(&x)).norm() / norm_b;
            if true_relres < tol {
                converged = true;
                relres_final = true_relres;
                break;
            }
        }
        z = match m_inv {
            Some(m) => m.apply(&r),
            None => r.clone(),
        };
        let rho_new = r.dotc(&z);
        let beta = rho_new / rho;
        rho = rho_new;
        p = &z + &p * beta;
    }
    if !converged {
        relres_final = (b - a.apply(&x)).norm() / norm_b;
        converged = relres_final < tol;
    }
    Ok(SolveOutcome {
        x,
        report: SolveReport {
            solver: solver.into(),
            preconditioner: prec.into(),
            iterations: history.len() - 1,
            converged,
            residual_history: history,
            relres_final,
            original_system_relres: None,
            wall_time: t0.elapsed(),
        },
    })
}

/// Preconditioned CG for a Hermitian positive definite operator. The HPD
/// requirement is spot-checked on three random probes for both the operator
/// and the preconditioner, and monitored through ⟨p, Ap⟩ during iteration.
pub fn cg(
    a: &dyn LinearOperator,
    b: &CVector,
    m_inv: Option<&dyn LinearOperator>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, KrylovError> {
    check_dims(a, b)?;
    spot_check_hpd(a, true, "operator")?;
    if let Some(m) = m_inv {
        check_dims(m, b)?;
        spot_check_hpd(m, true, "preconditioner")?;
    }
    cg_core(a, b, m_inv, cfg.tol, cfg.max_iter, "cg", prec_label(m_inv))
}

fn prec_label(m_inv: Option<&dyn LinearOperator>) -> &'static str {
    if m_inv.is_some() { "preconditioned" } else { "none" }
}

/// CG on the normal equations. Without a preconditioner this solves
/// `G*G x = G*b`; with `M⁻¹` it solves the explicitly preconditioned system
///
/// ```text
///     (M⁻¹G)* (M⁻¹G) x = (M⁻¹G)* M⁻¹ b.
/// ```
///
/// Convergence is judged on the normal-equations residual; the report also
/// carries the original-system relative residual `‖b − Gx‖/‖b‖`.
pub fn cgnr(
    g: &dyn LinearOperator,
    b: &CVector,
    m_inv: Option<&dyn LinearOperator>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, KrylovError> {
    check_dims(g, b)?;
    let composed;
    let base: &dyn LinearOperator = match m_inv {
        Some(m) => {
            check_dims(m, b)?;
            composed = ComposedOperator { outer: m, inner: g };
            &composed
        }
        None => g,
    };
    let prec_b = match m_inv {
        Some(m) => m.apply(b),
        None => b.clone(),
    };
    let rhs = base.apply_adjoint(&prec_b);
    let normal = NormalEquationsOperator { base };
    let mut outcome = cg_core(
        &normal,
        &rhs,
        None,
        cfg.tol,
        cfg.max_iter,
        "cgnr",
        prec_label(m_inv),
    )?;
    let norm_b = b.norm();
    if norm_b > 0.0 {
        outcome.report.original_system_relres = Some((b - g.apply(&outcome.x)).norm() / norm_b);
    }
    Ok(outcome)
}

/// Preconditioned MINRES for a Hermitian (possibly indefinite) operator with
/// a Hermitian positive definite preconditioner. Convergence is checked on
/// the true residual `‖b − Ax‖/‖b‖` each iteration.
pub fn minres(
    a: &dyn LinearOperator,
    b: &CVector,
    m_inv: Option<&dyn LinearOperator>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, KrylovError> {
    let t0 = Instant::now();
    check_dims(a, b)?;
    spot_check_hpd(a, false, "operator")?;
    if let Some(m) = m_inv {
        check_dims(m, b)?;
        spot_check_hpd(m, true, "preconditioner")?;
    }
    let n = b.len();
    let norm_b = b.norm();
    let solver = "minres";
    let prec = prec_label(m_inv);
    if norm_b == 0.0 {
        return Ok(trivial_outcome(n, solver, prec, t0));
    }

    let apply_m = |v: &CVector| -> CVector {
        match m_inv {
            Some(m) => m.apply(v),
            None => v.clone(),
        }
    };

    let mut x = CVector::zeros(n);
    let mut y = apply_m(b);
    let beta1 = b.dotc(&y).re;
    if beta1 < 0.0 {
        return Err(KrylovError::PreconditionerNotHPD { quad: C64::new(beta1, 0.0) });
    }
    let beta1 = beta1.sqrt();

    let mut r1 = b.clone();
    let mut r2 = b.clone();
    let (mut oldb, mut beta) = (0.0f64, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = CVector::zeros(n);
    let mut w2 = CVector::zeros(n);

    let mut history = vec![1.0];
    let mut converged = false;
    let mut relres_final = 1.0;

    for _ in 0..cfg.max_iter {
        let s = 1.0 / beta;
        let v = &y * real_scalar(s);
        y = a.apply(&v);
        if history.len() >= 2 {
            y -= &r1 * real_scalar(beta / oldb);
        }
        let alfa = v.dotc(&y).re;
        y -= &r2 * real_scalar(alfa / beta);
        r1 = std::mem::replace(&mut r2, y);
        y = apply_m(&r2);
        oldb = beta;
        let beta_sq = r2.dotc(&y).re;
        if beta_sq < -1e-12 * r2.norm_squared() {
            return Err(KrylovError::PreconditionerNotHPD { quad: C64::new(beta_sq, 0.0) });
        }
        beta = beta_sq.max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        w = (&v - &w1 * real_scalar(oldeps) - &w2 * real_scalar(delta)) * real_scalar(1.0 / gamma);
        x += &w * real_scalar(phi);

        let relres = (b - a.apply(&x)).norm() / norm_b;
        history.push(relres);
        if relres < cfg.tol {
            converged = true;
            relres_final = relres;
            break;
        }
        if beta == 0.0 {
            // Krylov space exhausted
            break;
        }
    }
    if !converged {
        relres_final = (b - a.apply(&x)).norm() / norm_b;
        converged = relres_final < cfg.tol;
    }
    Ok(SolveOutcome {
        x,
        report: SolveReport {
            solver: solver.into(),
            preconditioner: prec.into(),
            iterations: history.len() - 1,
            converged,
            residual_history: history,
            relres_final,
            original_system_relres: None,
            wall_time: t0.elapsed(),
        },
    })
}

/// Complex Givens rotation zeroing the second component of (f, g):
/// returns (c real, s complex, r complex) with [c, s; -s̄, c]·[f; g] = [r; 0].
fn givens(f: C64, g: C64) -> (f64, C64, C64) {
    if g.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0), f);
    }
    if f.norm() == 0.0 {
        return (0.0, g.conj() / g.norm(), real_scalar(g.norm()));
    }
    let t = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let c = f.norm() / t;
    let phase = f / f.norm();
    let s = phase * g.conj() / t;
    (c, s, phase * t)
}

/// Full (unrestarted) GMRES with left preconditioning, modified Gram–Schmidt
/// orthogonalization, and one reorthogonalization pass whenever the residual
/// overlap of the new basis vector exceeds 1e-8 of its norm. Convergence is
/// judged on the preconditioned relative residual.
pub fn gmres(
    g: &dyn LinearOperator,
    b: &CVector,
    m_inv: Option<&dyn LinearOperator>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, KrylovError> {
    let t0 = Instant::now();
    check_dims(g, b)?;
    if let Some(m) = m_inv {
        check_dims(m, b)?;
    }
    let n = b.len();
    let solver = "gmres";
    let prec = prec_label(m_inv);

    let apply_op = |v: &CVector| -> CVector {
        match m_inv {
            Some(m) => m.apply(&g.apply(v)),
            None => g.apply(v),
        }
    };
    let b_hat = match m_inv {
        Some(m) => m.apply(b),
        None => b.clone(),
    };
    let beta = b_hat.norm();
    if beta == 0.0 {
        return Ok(trivial_outcome(n, solver, prec, t0));
    }

    let max_dim = cfg.max_iter.min(n);
    let mut basis: Vec<CVector> = vec![&b_hat * real_scalar(1.0 / beta)];
    // Hessenberg columns after rotation (upper triangular R), plus rotations
    let mut r_cols: Vec<Vec<C64>> = Vec::new();
    let mut rotations: Vec<(f64, C64)> = Vec::new();
    let mut rs: Vec<C64> = vec![real_scalar(beta)];
    let mut history = vec![1.0];

    for j in 0..max_dim {
        let mut wv = apply_op(&basis[j]);
        let pre_norm = wv.norm();
        let mut h = vec![C64::new(0.0, 0.0); j + 2];
        for (i, vi) in basis.iter().enumerate() {
            let hij = vi.dotc(&wv);
            wv -= vi * hij;
            h[i] = hij;
        }
        // reorthogonalization pass when loss of orthogonality exceeds 1e-8
        let overlaps: Vec<C64> = basis.iter().map(|vi| vi.dotc(&wv)).collect();
        let overlap_norm = overlaps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if overlap_norm > 1e-8 * wv.norm().max(f64::MIN_POSITIVE) {
            for (i, vi) in basis.iter().enumerate() {
                wv -= vi * overlaps[i];
                h[i] += overlaps[i];
            }
        }
        let h_next = wv.norm();
        h[j + 1] = real_scalar(h_next);

        // apply accumulated rotations to the new column
        for (i, &(c, s)) in rotations.iter().enumerate() {
            let t1 = h[i] * c + h[i + 1] * s;
            let t2 = -h[i] * s.conj() + h[i + 1] * c;
            h[i] = t1;
            h[i + 1] = t2;
        }
        let (c, s, r) = givens(h[j], h[j + 1]);
        h[j] = r;
        h[j + 1] = C64::new(0.0, 0.0);
        rotations.push((c, s));
        let rs_next = -rs[j] * s.conj();
        rs[j] *= c;
        rs.push(rs_next);
        r_cols.push(h);

        let relres = rs[j + 1].norm() / beta;
        history.push(relres);

        let breakdown = h_next <= 1e-14 * pre_norm.max(f64::MIN_POSITIVE);
        if relres < cfg.tol || breakdown || j + 1 == max_dim {
            break;
        }
        basis.push(wv * real_scalar(1.0 / h_next));
    }

    // back-substitute R y = rs
    let k = r_cols.len();
    let mut y = vec![C64::new(0.0, 0.0); k];
    for i in (0..k).rev() {
        let mut acc = rs[i];
        for (jj, yv) in y.iter().enumerate().take(k).skip(i + 1) {
            acc -= r_cols[jj][i] * yv;
        }
        let diag = r_cols[i][i];
        if diag.norm() == 0.0 {
            return Err(KrylovError::BreakdownHessenbergSingular { column: i });
        }
        y[i] = acc / diag;
    }
    let mut x = CVector::zeros(n);
    for (i, yv) in y.iter().enumerate() {
        x += &basis[i] * *yv;
    }
    let resid = match m_inv {
        Some(m) => m.apply(&(b - g.apply(&x))),
        None => b - g.apply(&x),
    };
    let relres_final = resid.norm() / beta;
    let converged = relres_final < cfg.tol;
    Ok(SolveOutcome {
        x,
        report: SolveReport {
            solver: solver.into(),
            preconditioner: prec.into(),
            iterations: k,
            converged,
            residual_history: history,
            relres_final,
            original_system_relres: None,
            wall_time: t0.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfn::catalog;
    use crate::matfun::{expm, sinm, FunctionKind};
    use crate::structured::{abs_circulant_fn, optimal_circulant, CirculantMatrix, ToeplitzMatrix};
    use nalgebra::DMatrix;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag_op(entries: &[f64]) -> DenseOperator {
        let m = DMatrix::from_diagonal(&CVector::from_iterator(
            entries.len(),
            entries.iter().map(|&e| c(e, 0.0)),
        ));
        DenseOperator::new(m, true, entries.iter().all(|&e| e > 0.0))
    }

    fn random_complex_vec(n: usize, seed: u64) -> CVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CVector::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
    }

    fn random_real_vec(n: usize, seed: u64) -> CVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CVector::from_fn(n, |_, _| c(rng.sample(StandardNormal), 0.0))
    }

    #[test]
    fn operators_are_linear_on_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = DMatrix::from_fn(9, 9, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let op = DenseOperator::general(m);
        let circ = CirculantMatrix::new(
            (0..9).map(|_| c(rng.gen::<f64>() + 0.5, rng.gen::<f64>())).collect(),
        );
        let inv = circ.fn_inverse(FunctionKind::Exp).unwrap();
        for trial in 0..5 {
            let x = random_complex_vec(9, 100 + trial);
            let y = random_complex_vec(9, 200 + trial);
            let (alpha, beta) = (c(1.3, -0.2), c(-0.7, 0.9));
            for op in [&op as &dyn LinearOperator, &inv as &dyn LinearOperator] {
                let lhs = op.apply(&(&x * alpha + &y * beta));
                let rhs = op.apply(&x) * alpha + op.apply(&y) * beta;
                assert!((lhs - rhs).norm() <= 1e-10 * (x.norm() + y.norm()));
            }
        }
    }

    #[test]
    fn cg_identity_converges_in_one_iteration() {
        let op = diag_op(&[1.0, 1.0, 1.0, 1.0]);
        let b = random_complex_vec(4, 1);
        let out = cg(&op, &b, None, &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);
        assert!((out.x - b).norm() < 1e-12);
    }

    #[test]
    fn cg_finite_termination_on_two_eigenvalues() {
        let op = diag_op(&[1.0, 2.0]);
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let out = cg(&op, &b, None, &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(out.report.iterations <= 2);
    }

    #[test]
    fn cg_rejects_indefinite_operator() {
        let op = DenseOperator::new(
            DMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)])),
            true,
            false,
        );
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        match cg(&op, &b, None, &SolverConfig::default()) {
            Err(KrylovError::IndefinitenessDetected { .. }) => {}
            other => panic!("expected IndefinitenessDetected, got {other:?}"),
        }
    }

    #[test]
    fn cg_rejects_non_hermitian_probe() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let op = DenseOperator::general(m);
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            cg(&op, &b, None, &SolverConfig::default()),
            Err(KrylovError::OperatorNotHermitian { .. })
        ));
    }

    #[test]
    fn cg_with_exact_circulant_inverse_takes_one_iteration() {
        // A itself circulant HPD, M = A: the preconditioned operator is I
        let eigs: Vec<C64> = (1..=8).map(|k| c(k as f64, 0.0)).collect();
        let circ = CirculantMatrix::from_eigenvalues(&eigs);
        let inv = circ.inverse().unwrap();
        let op = DenseOperator::hermitian_positive_definite(circ.to_dense());
        let b = random_complex_vec(8, 3);
        let out = cg(&op, &b, Some(&inv), &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);
    }

    #[test]
    fn cgnr_identity_and_diagnostic_residual() {
        let op = diag_op(&[1.0, 1.0, 1.0]);
        let b = random_complex_vec(3, 9);
        let out = cgnr(&op, &b, None, &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);
        let orig = out.report.original_system_relres.unwrap();
        assert!(orig < 1e-10);
    }

    #[test]
    fn minres_indefinite_two_eigenvalues() {
        let op = DenseOperator::hermitian(DMatrix::from_diagonal(&CVector::from_vec(vec![
            c(1.0, 0.0),
            c(-1.0, 0.0),
        ])));
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let out = minres(&op, &b, None, &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(out.report.iterations <= 2);
    }

    #[test]
    fn minres_rejects_non_hpd_preconditioner() {
        let op = diag_op(&[1.0, 2.0, 3.0]);
        let neg = DenseOperator::new(CMatrix::identity(3, 3) * c(-1.0, 0.0), true, false);
        let b = random_complex_vec(3, 5);
        assert!(matches!(
            minres(&op, &b, Some(&neg), &SolverConfig::default()),
            Err(KrylovError::PreconditionerNotHPD { .. })
        ));
    }

    #[test]
    fn gmres_identity_and_three_distinct_eigenvalues() {
        let op = diag_op(&[1.0; 5]);
        let b = random_complex_vec(5, 17);
        let out = gmres(&op, &b, None, &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);

        // spectral synthesis: unitary Q from QR of a random matrix, three
        // distinct unimodular eigenvalues
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let m = DMatrix::from_fn(8, 8, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let q = m.qr().q();
        let picks = [c(1.0, 0.0), c(0.0, 1.0), c(-0.6, 0.8)];
        let d = DMatrix::from_diagonal(&CVector::from_fn(8, |i, _| picks[i % 3]));
        let g_mat = q.adjoint() * d * &q;
        let op = DenseOperator::general(g_mat);
        let b = random_complex_vec(8, 19);
        let out = gmres(&op, &b, None, &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(out.report.iterations <= 3, "took {}", out.report.iterations);
    }

    #[test]
    fn exit_residual_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let m = DMatrix::from_fn(12, 12, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let spd = &m * m.adjoint() + CMatrix::identity(12, 12) * c(4.0, 0.0);
        let op = DenseOperator::hermitian_positive_definite(spd.clone());
        let b = random_complex_vec(12, 6);

        let out = cg(&op, &b, None, &SolverConfig::default()).unwrap();
        let recomputed = (&b - &spd * &out.x).norm() / b.norm();
        assert!((out.report.relres_final - recomputed).abs() <= 1e-12 * recomputed.max(1e-30));

        let out = minres(&op, &b, None, &SolverConfig::default()).unwrap();
        let recomputed = (&b - &spd * &out.x).norm() / b.norm();
        assert!((out.report.relres_final - recomputed).abs() <= 1e-12 * recomputed.max(1e-30));

        let out = gmres(&op, &b, None, &SolverConfig::default()).unwrap();
        let recomputed = (&b - &spd * &out.x).norm() / b.norm();
        assert!((out.report.relres_final - recomputed).abs() <= 1e-12 * recomputed.max(1e-30));
    }

    #[test]
    fn residual_histories_monotone_where_guaranteed() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m = DMatrix::from_fn(20, 20, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let herm = crate::linalg::symmetrize(&m); // indefinite Hermitian
        let b = random_complex_vec(20, 2);

        let out = minres(
            &DenseOperator::hermitian(herm.clone()),
            &b,
            None,
            &SolverConfig::default(),
        )
        .unwrap();
        for w in out.report.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10), "minres history not monotone");
        }

        let out = gmres(&DenseOperator::general(m), &b, None, &SolverConfig::default()).unwrap();
        for w in out.report.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10), "gmres history not monotone");
        }
    }

    #[test]
    fn iteration_counts_invariant_under_rhs_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = DMatrix::from_fn(16, 16, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let spd = &m * m.adjoint() + CMatrix::identity(16, 16) * c(2.0, 0.0);
        let b = random_complex_vec(16, 31);
        let scaled = &b * c(3.0, -4.0);
        let cfg = SolverConfig::default();

        let op = DenseOperator::hermitian_positive_definite(spd);
        let r1 = cg(&op, &b, None, &cfg).unwrap().report;
        let r2 = cg(&op, &scaled, None, &cfg).unwrap().report;
        assert_eq!(r1.iterations, r2.iterations);

        let r1 = gmres(&op, &b, None, &cfg).unwrap().report;
        let r2 = gmres(&op, &scaled, None, &cfg).unwrap().report;
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn max_iter_exhaustion_reports_not_converged() {
        let op = diag_op(&[1.0, 1e-8, 2.0, 3.0]);
        let b = random_complex_vec(4, 44);
        let cfg = SolverConfig { max_iter: 1, ..Default::default() };
        let out = cg(&op, &b, None, &cfg).unwrap();
        assert!(!out.report.converged);
        assert_eq!(out.report.iterations, 1);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let op = diag_op(&[1.0, 2.0]);
        let b = random_complex_vec(3, 0);
        assert!(matches!(
            cg(&op, &b, None, &SolverConfig::default()),
            Err(KrylovError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    // Single-cell reproductions of the n = 128 experiment rows.

    #[test]
    fn exp_symbol_cg_unpreconditioned_count_window() {
        let f = catalog::symbol("ex1").unwrap();
        let a = ToeplitzMatrix::from_symbol(&f, 128).unwrap();
        let ga = crate::linalg::symmetrize(&expm(&a.to_dense()).unwrap());
        let op = DenseOperator::hermitian_positive_definite(ga);
        let b = random_real_vec(128, 20160701);
        let out = cg(&op, &b, None, &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(
            (180..=280).contains(&out.report.iterations),
            "iterations = {}",
            out.report.iterations
        );
    }

    #[test]
    fn exp_complex_symbol_cgnr_preconditioned_count_window() {
        let f = catalog::symbol("ex2").unwrap();
        let a = ToeplitzMatrix::from_symbol(&f, 128).unwrap();
        let ga = expm(&a.to_dense()).unwrap();
        let m_inv = optimal_circulant(&a).fn_inverse(FunctionKind::Exp).unwrap();
        let op = DenseOperator::general(ga);
        let b = random_complex_vec(128, 20160701);
        let out = cgnr(&op, &b, Some(&m_inv), &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(
            (40..=120).contains(&out.report.iterations),
            "iterations = {}",
            out.report.iterations
        );
    }

    #[test]
    fn exp_complex_symbol_gmres_preconditioned_count_window() {
        let f = catalog::symbol("ex2").unwrap();
        let a = ToeplitzMatrix::from_symbol(&f, 128).unwrap();
        let ga = expm(&a.to_dense()).unwrap();
        let m_inv = optimal_circulant(&a).fn_inverse(FunctionKind::Exp).unwrap();
        let op = DenseOperator::general(ga);
        let b = random_complex_vec(128, 20160701);
        let out = gmres(&op, &b, Some(&m_inv), &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(
            (15..=30).contains(&out.report.iterations),
            "iterations = {}",
            out.report.iterations
        );
    }

    #[test]
    fn sin_symbol_minres_abs_circulant_count_window() {
        let f = catalog::symbol("ex3").unwrap();
        let a = ToeplitzMatrix::from_symbol(&f, 128).unwrap();
        let ga = crate::linalg::symmetrize(&sinm(&a.to_dense()).unwrap());
        let abs = abs_circulant_fn(&optimal_circulant(&a), FunctionKind::Sin).unwrap();
        let m_inv = abs.inverse();
        let op = DenseOperator::hermitian(ga);
        let b = random_real_vec(128, 20160701);
        let out = minres(&op, &b, Some(&m_inv), &SolverConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(
            (10..=25).contains(&out.report.iterations),
            "iterations = {}",
            out.report.iterations
        );
    }
}
