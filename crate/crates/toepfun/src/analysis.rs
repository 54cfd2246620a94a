//! Numerical verification of the spectral structure behind the
//! preconditioners: eigenvalue clustering of preconditioned operators,
//! low-rank-plus-small-norm splits of `g(c) − g(A)`, the unitary-plus-
//! perturbation shape of `|g(c)|⁻¹ g(A)`, and norm-bound audits.

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::genfn::GeneratingFunction;
use crate::linalg::{self, EigError};
use crate::matfun::{self, FunctionKind, MatFunError};
use crate::structured::{
    abs_circulant_fn, optimal_circulant, CirculantFnInverse, CirculantMatrix, StructuredError,
    ToeplitzMatrix,
};
use crate::{C64, CMatrix};

/// Dense analysis is limited to this size to keep eigensolver cost desk-scale.
pub const MAX_DENSE_N: usize = 4096;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("dense analysis is limited to n ≤ {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },
    #[error("symbol must be real-valued for the Hermitian |g(c)|⁻¹ g(A) analysis")]
    SymbolNotReal,
    #[error(transparent)]
    Eig(#[from] EigError),
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error(transparent)]
    MatFun(#[from] MatFunError),
}

fn serialize_complex_slice<S: Serializer>(v: &[C64], ser: S) -> Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(ser)
}

/// Eigenvalue cloud around a cluster center: the values sorted by distance
/// from the center (farthest first) and the count outside radius ε.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    #[serde(serialize_with = "serialize_complex_slice")]
    pub eigenvalues: Vec<C64>,
    #[serde(serialize_with = "serialize_complex")]
    pub cluster_center: C64,
    pub cluster_radius: f64,
    pub outlier_count: usize,
    /// Positions of the outliers in the (distance-sorted) eigenvalue list.
    pub outlier_indices: Vec<usize>,
}

fn serialize_complex<S: Serializer>(z: &C64, ser: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(ser)
}

/// Dense eigenvalues, certified by the residual rules of the underlying
/// decomposition (eigenpair residuals for Hermitian input, Schur
/// reconstruction otherwise). A Hermitian matrix whose eigenpair residuals
/// miss the certification (extreme condition numbers) is retried on the
/// Schur path, which certifies by reconstruction instead.
pub fn spectrum(op: &CMatrix) -> Result<Vec<C64>, AnalysisError> {
    let n = op.nrows();
    if n > MAX_DENSE_N {
        return Err(AnalysisError::TooLarge { n, max: MAX_DENSE_N });
    }
    if linalg::is_hermitian(op) {
        match linalg::hermitian_eigen(op) {
            Ok((lam, _)) => return Ok(lam.into_iter().map(|l| C64::new(l, 0.0)).collect()),
            Err(EigError::ResidualTooLarge { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(linalg::eigenvalues(op)?)
}

/// Sort eigenvalues by distance from `center` (descending) and count the
/// ones outside radius `epsilon`.
pub fn cluster_report(eigs: &[C64], center: C64, epsilon: f64) -> SpectrumReport {
    assert!(epsilon > 0.0, "cluster radius must be positive");
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| (b - center).norm().total_cmp(&(a - center).norm()));
    let outlier_count = sorted.iter().filter(|l| (*l - center).norm() > epsilon).count();
    SpectrumReport {
        n: eigs.len(),
        eigenvalues: sorted,
        cluster_center: center,
        cluster_radius: epsilon,
        outlier_count,
        outlier_indices: (0..outlier_count).collect(),
    }
}

/// Low-rank-plus-small-norm split measured through singular values: the
/// numerical rank cut M̂ = min{k : σ_{k+1} ≤ ε} and the norms of what is left.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    /// Singular values, non-increasing.
    pub sigma: Vec<f64>,
    /// Numerical rank cut M̂.
    pub rank_cut: usize,
    /// σ_{M̂+1}: 2-norm of the residual after removing the best rank-M̂ part
    /// (zero when M̂ = n).
    pub tail_norm: f64,
    /// Frobenius norm of the tail σ_{M̂+1..}.
    pub frob_tail: f64,
}

/// Split `D = R + E` with rank(R) = M̂ minimal such that ‖E‖₂ ≤ ε.
pub fn decompose_difference(d: &CMatrix, epsilon: f64) -> DecompositionReport {
    let sigma = linalg::singular_values(d);
    let rank_cut = sigma.iter().position(|&s| s <= epsilon).unwrap_or(sigma.len());
    let tail_norm = sigma.get(rank_cut).copied().unwrap_or(0.0);
    let frob_tail = sigma[rank_cut..].iter().map(|s| s * s).sum::<f64>().sqrt();
    DecompositionReport { sigma, rank_cut, tail_norm, frob_tail }
}

/// Result of the `|g(c)|⁻¹ g(A) = Q + low-rank + small-norm` check for a
/// real-valued symbol.
#[derive(Clone, Debug, Serialize)]
pub struct UnitaryPlusReport {
    pub n: usize,
    /// ‖Q² − I‖_F.
    pub involution_defect: f64,
    /// ‖Q − Q*‖_F.
    pub hermitian_defect: f64,
    /// Split of P − Q.
    pub decomposition: DecompositionReport,
    /// Real eigenvalues of P = |g(c)|⁻¹ g(A) (via Hermitian similarity).
    pub eigenvalues: Vec<f64>,
    /// Fraction of eigenvalues within 0.05 of +1 or −1.
    pub pm_one_fraction: f64,
}

/// Form P = |g(c_n[f])|⁻¹ g(A_n[f]) and Q = F*·sign(g(Λ))·F for a real
/// symbol, verify that Q is a Hermitian involution, and split P − Q.
pub fn unitary_plus_check(
    f: &GeneratingFunction,
    g: FunctionKind,
    n: usize,
    epsilon: f64,
) -> Result<UnitaryPlusReport, AnalysisError> {
    if !f.is_real_valued() {
        return Err(AnalysisError::SymbolNotReal);
    }
    if n > MAX_DENSE_N {
        return Err(AnalysisError::TooLarge { n, max: MAX_DENSE_N });
    }
    let a = ToeplitzMatrix::from_symbol(f, n)?;
    let circ = optimal_circulant(&a);
    let abs = abs_circulant_fn(&circ, g)?;

    // signs of g(λ): real for a Hermitian circulant; the floor check above
    // guarantees none sits at zero
    let signs: Vec<C64> = circ
        .eigenvalues()
        .iter()
        .map(|&l| {
            let v = g.apply_scalar(l);
            C64::new(if v.re >= 0.0 { 1.0 } else { -1.0 }, 0.0)
        })
        .collect();
    let q = CirculantMatrix::from_eigenvalues(&signs).to_dense();
    let involution_defect = linalg::frobenius(&(&q * &q - CMatrix::identity(n, n)));
    let hermitian_defect = linalg::frobenius(&(&q - q.adjoint()));

    let ga = linalg::symmetrize(&matfun::apply(g, &a.to_dense())?);
    let p = abs.inverse().apply_to_columns(&ga);
    let decomposition = decompose_difference(&(&p - &q), epsilon);

    // eigenvalues of P through the Hermitian similarity
    // |gc|^{-1/2} g(A) |gc|^{-1/2}
    let half = abs.inverse_sqrt();
    let sym = half.apply_to_columns(&half.apply_to_columns(&ga).adjoint());
    let (lam, _) = linalg::hermitian_eigen(&linalg::symmetrize(&sym))?;
    let pm = lam
        .iter()
        .filter(|&&l| (l - 1.0).abs() <= 0.05 || (l + 1.0).abs() <= 0.05)
        .count();
    let pm_one_fraction = pm as f64 / n as f64;
    Ok(UnitaryPlusReport {
        n,
        involution_defect,
        hermitian_defect,
        decomposition,
        eigenvalues: lam,
        pm_one_fraction,
    })
}

/// Norm audits with dense norms: the ‖A_n[f]‖₂, ‖c_n[f]‖₂ ≤ 2‖f‖∞ pair and
/// the inverse-exponential bound ‖(e^{c_n[f]})⁻¹‖₂ ≤ e^{2‖f‖∞}.
#[derive(Clone, Debug, Serialize)]
pub struct NormBoundAudit {
    pub n: usize,
    pub sup_norm: f64,
    pub toeplitz_norm: f64,
    pub circulant_norm: f64,
    pub pair_bound: f64,
    pub inv_exp_circulant_norm: f64,
    pub inv_exp_bound: f64,
    pub slack: f64,
    pub holds: bool,
}

pub fn norm_bound_audit(f: &GeneratingFunction, n: usize) -> Result<NormBoundAudit, AnalysisError> {
    if n > MAX_DENSE_N {
        return Err(AnalysisError::TooLarge { n, max: MAX_DENSE_N });
    }
    let slack = 1e-8;
    let a = ToeplitzMatrix::from_symbol(f, n)?;
    let circ = optimal_circulant(&a);
    let sup = f.sup_norm_estimate();
    let toeplitz_norm = linalg::norm2(&a.to_dense());
    let circulant_norm = linalg::norm2(&circ.to_dense());
    let pair_bound = 2.0 * sup;
    // dense route: expm of the dense circulant, smallest singular value
    let exp_c = matfun::expm(&circ.to_dense())?;
    let sigma = linalg::singular_values(&exp_c);
    let sigma_min = sigma.last().copied().unwrap_or(0.0);
    let inv_exp_circulant_norm = if sigma_min > 0.0 { 1.0 / sigma_min } else { f64::INFINITY };
    let inv_exp_bound = (2.0 * sup).exp();
    let holds = toeplitz_norm <= pair_bound + slack
        && circulant_norm <= pair_bound + slack
        && inv_exp_circulant_norm <= inv_exp_bound + slack;
    Ok(NormBoundAudit {
        n,
        sup_norm: sup,
        toeplitz_norm,
        circulant_norm,
        pair_bound,
        inv_exp_circulant_norm,
        inv_exp_bound,
        slack,
        holds,
    })
}

/// The dense preconditioned normal-equations matrix
/// `(g(c)⁻¹ g(A))* (g(c)⁻¹ g(A))`.
pub fn preconditioned_normal_matrix(ga: &CMatrix, m_inv: &CirculantFnInverse) -> CMatrix {
    let b = m_inv.apply_to_columns(ga);
    b.ad_mul(&b)
}

/// Write an eigenvalue cloud as headerless "re,im" CSV rows.
pub fn write_eigs_csv<W: std::io::Write>(eigs: &[C64], mut out: W) -> std::io::Result<()> {
    for z in eigs {
        writeln!(out, "{:e},{:e}", z.re, z.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfn::{catalog, GeneratingFunction, TrigPoly};
    use crate::CVector;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn spectrum_of_identity_and_diagonal() {
        let eigs = spectrum(&CMatrix::identity(4, 4)).unwrap();
        for l in eigs {
            assert!((l - c(1.0, 0.0)).norm() < 1e-12);
        }
        let d = DMatrix::from_diagonal(&CVector::from_vec(vec![
            c(1.0, 0.0),
            c(2.0, 0.0),
            c(3.0, 0.0),
        ]));
        let mut eigs: Vec<f64> = spectrum(&d).unwrap().iter().map(|z| z.re).collect();
        eigs.sort_by(f64::total_cmp);
        assert_relative_eq!(eigs[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(eigs[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(eigs[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_of_shift_circulant_is_roots_of_unity() {
        let shift = CirculantMatrix::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let eigs = spectrum(&shift.to_dense()).unwrap();
        for l in &eigs {
            assert_relative_eq!(l.norm(), 1.0, epsilon = 1e-10);
            // 4th root of unity: λ⁴ = 1
            let l4 = l * l * l * l;
            assert!((l4 - c(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn cluster_report_counts_outliers() {
        let report = cluster_report(&[c(1.0, 0.0); 3], c(1.0, 0.0), 0.1);
        assert_eq!(report.outlier_count, 0);
        assert!(report.outlier_indices.is_empty());

        let report = cluster_report(&[c(1.0, 0.0), c(1.0, 0.0), c(5.0, 0.0)], c(1.0, 0.0), 0.1);
        assert_eq!(report.outlier_count, 1);
        assert_eq!(report.outlier_indices, vec![0]);
        // sorted farthest-first
        assert!((report.eigenvalues[0] - c(5.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decompose_difference_trivial_and_synthetic() {
        let zero = CMatrix::zeros(6, 6);
        let rep = decompose_difference(&zero, 1e-6);
        assert_eq!(rep.rank_cut, 0);
        assert_eq!(rep.tail_norm, 0.0);

        // rank-2 plus 1e-9 noise
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 12;
        let u = CVector::from_fn(n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen()));
        let v = CVector::from_fn(n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen()));
        let w = CVector::from_fn(n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen()));
        let z = CVector::from_fn(n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen()));
        let noise = DMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, 0.0) * 1e-9);
        let d = &u * v.adjoint() + &w * z.adjoint() + noise;
        let rep = decompose_difference(&d, 1e-6);
        assert_eq!(rep.rank_cut, 2);
        assert!(rep.tail_norm <= 1e-6);
    }

    #[test]
    fn unitary_plus_q_is_hermitian_involution() {
        let f = catalog::symbol("ex3").unwrap();
        let n = 64;
        let rep = unitary_plus_check(&f, FunctionKind::Sin, n, 1e-2).unwrap();
        let tol = 1e-10 * (n as f64).sqrt();
        assert!(rep.involution_defect <= tol, "‖Q²−I‖ = {:.3e}", rep.involution_defect);
        assert!(rep.hermitian_defect <= tol, "‖Q−Q*‖ = {:.3e}", rep.hermitian_defect);
    }

    #[test]
    fn unitary_plus_reduces_to_identity_for_positive_signs() {
        // constant symbol π/2: c = (π/2)I, sin(c) = I, all signs positive
        let p = TrigPoly::constant(c(std::f64::consts::FRAC_PI_2, 0.0));
        let f = GeneratingFunction::from_trig_poly(p);
        let rep = unitary_plus_check(&f, FunctionKind::Sin, 16, 1e-8).unwrap();
        // Q = I means P − Q = P − I which for the constant symbol is zero
        assert!(rep.decomposition.rank_cut == 0);
        assert!(rep.pm_one_fraction > 0.99);
    }

    #[test]
    fn unitary_plus_rejects_complex_symbol() {
        let f = catalog::symbol("ex2").unwrap();
        assert!(matches!(
            unitary_plus_check(&f, FunctionKind::Sin, 16, 1e-2),
            Err(AnalysisError::SymbolNotReal)
        ));
    }

    #[test]
    fn norm_audit_constant_zero_symbol() {
        let f = GeneratingFunction::from_trig_poly(TrigPoly::constant(c(0.0, 0.0)));
        let audit = norm_bound_audit(&f, 8).unwrap();
        assert!(audit.holds);
        assert_relative_eq!(audit.inv_exp_circulant_norm, 1.0, epsilon = 1e-10);
        assert_relative_eq!(audit.inv_exp_bound, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn norm_audit_catalog_small_sizes() {
        for name in ["ex1", "ex2"] {
            let f = catalog::symbol(name).unwrap();
            let audit = norm_bound_audit(&f, 64).unwrap();
            assert!(audit.holds, "{name}: {audit:?}");
        }
    }

    #[test]
    fn outlier_count_stable_for_low_degree_symbol() {
        // a degree-1 symbol is its own trigonometric approximation, so the
        // preconditioned normal-equations spectrum clusters immediately and
        // the outlier count is n-independent
        let p = TrigPoly::new(&[
            (0, c(1.2, 0.0)),
            (1, c(0.15, 0.05)),
            (-1, c(0.15, -0.05)),
        ]);
        let f = GeneratingFunction::from_trig_poly(p);
        let mut counts = Vec::new();
        for n in [32usize, 64, 128] {
            let a = ToeplitzMatrix::from_symbol(&f, n).unwrap();
            let ga = matfun::expm(&a.to_dense()).unwrap();
            let m_inv = optimal_circulant(&a).fn_inverse(FunctionKind::Exp).unwrap();
            let normal = preconditioned_normal_matrix(&ga, &m_inv);
            let eigs = spectrum(&normal).unwrap();
            counts.push(cluster_report(&eigs, c(1.0, 0.0), 0.1).outlier_count);
        }
        assert!(counts[1] <= counts[0] + 2, "counts {counts:?}");
        assert!(counts[2] <= counts[1] + 2, "counts {counts:?}");
        assert!(counts[2] <= 4, "low-degree symbol should have O(M) outliers: {counts:?}");
    }

    #[test]
    fn split_correction_cross_check_rank_cut() {
        // for a TrigPoly symbol the c − A split has numerical rank ≤ 2M
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = 2usize;
        let pairs: Vec<(i64, C64)> = (-(m as i64)..=(m as i64))
            .map(|k| (k, c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)))
            .collect();
        let p = TrigPoly::new(&pairs);
        let n = 24;
        let (_, w) = crate::structured::split_correction(&p, n).unwrap();
        let a = ToeplitzMatrix::from_trig_poly(&p, n);
        let diff = optimal_circulant(&a).to_dense() - a.to_dense();
        let rep = decompose_difference(&diff, linalg::norm2(&w) + 1e-12);
        assert!(rep.rank_cut <= 2 * m, "rank cut {} > 2M", rep.rank_cut);
    }

    #[test]
    fn eigs_csv_format() {
        let mut buf = Vec::new();
        write_eigs_csv(&[c(1.5, -2.0)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1.5e0,-2e0\n");
    }
}
