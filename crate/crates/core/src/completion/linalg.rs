//! Small dense helpers for symmetric matrices.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below `-CORRELATION_EIG_FLOOR * max(1, lambda_max)` make a
/// unit-diagonal matrix count as an invalid correlation matrix.
pub(crate) const CORRELATION_EIG_FLOOR: f64 = 1e-13;

/// Inputs with `lambda_min < -INDEFINITE_TOL * max(1, |lambda|_max)` are
/// rejected by the pseudoinverse.
pub(crate) const INDEFINITE_TOL: f64 = 1e-8;

pub fn symmetric_within(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    SymmetricEigen::new(m.clone())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigen(m).eigenvalues.min()
}

/// Rebuilds `V f(Lambda) V^T` from an eigendecomposition, symmetrised.
pub(crate) fn reconstruct(e: &SymmetricEigen<f64, Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &e.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lam) in e.eigenvalues.iter().enumerate() {
        let s = f(lam);
        scaled.column_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    let mut out = scaled * v.transpose();
    symmetrize(&mut out);
    out
}

/// Projection onto the PSD cone (negative eigenvalues clipped to zero).
pub(crate) fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    reconstruct(&eigen(m), |l| l.max(0.0))
}

/// Unit diagonal and PSD up to [`CORRELATION_EIG_FLOOR`].
pub(crate) fn is_correlation(m: &DMatrix<f64>) -> bool {
    if m.diagonal().iter().any(|&d| d != 1.0) {
        return false;
    }
    let e = eigen(m).eigenvalues;
    e.min() >= -CORRELATION_EIG_FLOOR * e.max().max(1.0)
}

/// Relative cutoff `n * 2^-52 * 1e3` applied to `lambda_max`.
pub fn default_rank_tol(n: usize) -> f64 {
    n.max(1) as f64 * f64::EPSILON * 1e3
}

pub(crate) struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
}

pub(crate) fn pseudoinverse_with_rank(
    m: &DMatrix<f64>,
    rank_tol: Option<f64>,
) -> Result<PseudoInverse> {
    if !m.is_square() {
        return Err(Error::validation("pseudoinverse needs a square matrix"));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(PseudoInverse {
            matrix: m.clone(),
            rank: 0,
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("pseudoinverse input is not finite"));
    }
    if !symmetric_within(m, 1e-10 * m.abs().max().max(1.0)) {
        return Err(Error::validation("pseudoinverse input is not symmetric"));
    }
    let rel = rank_tol.unwrap_or_else(|| default_rank_tol(n));
    let e = eigen(m);
    let lmax = e.eigenvalues.max();
    let lmin = e.eigenvalues.min();
    let scale = lmax.abs().max(lmin.abs());
    if lmin < -INDEFINITE_TOL * scale.max(1.0) {
        return Err(Error::validation(format!(
            "pseudoinverse input is indefinite (lambda_min = {lmin:e})"
        )));
    }
    if lmax <= 0.0 {
        return Ok(PseudoInverse {
            matrix: DMatrix::zeros(n, n),
            rank: 0,
        });
    }
    let cutoff = rel * lmax;
    let rank = e.eigenvalues.iter().filter(|&&l| l > cutoff).count();
    let matrix = reconstruct(&e, |l| if l > cutoff { 1.0 / l } else { 0.0 });
    Ok(PseudoInverse { matrix, rank })
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix through its
/// eigendecomposition. Eigenvalues at or below `rank_tol * lambda_max` are
/// treated as zero; `rank_tol` defaults to [`default_rank_tol`].
pub fn psd_pseudoinverse(m: &DMatrix<f64>, rank_tol: Option<f64>) -> Result<DMatrix<f64>> {
    pseudoinverse_with_rank(m, rank_tol).map(|p| p.matrix)
}

/// `log det` via Cholesky, `None` unless strictly positive definite.
pub fn log_det_pd(m: &DMatrix<f64>) -> Option<f64> {
    let c = Cholesky::new(m.clone())?;
    let l = c.l_dirty();
    let mut s = 0.0;
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if d.is_nan() || d <= 0.0 {
            return None;
        }
        s += d.ln();
    }
    Some(2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_identity_and_zero() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert!((psd_pseudoinverse(&i, None).unwrap() - &i).abs().max() < 1e-14);
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(psd_pseudoinverse(&z, None).unwrap(), z);
    }

    #[test]
    fn pinv_of_projector_is_itself() {
        let v = nalgebra::DVector::from_vec(vec![0.5, -0.5, 0.5, 0.5]);
        let p = &v * v.transpose();
        let pinv = pseudoinverse_with_rank(&p, None).unwrap();
        assert_eq!(pinv.rank, 1);
        assert!((&pinv.matrix - &p).abs().max() < 1e-12);
        assert!((&p * &pinv.matrix * &p - &p).abs().max() < 1e-12);
    }

    #[test]
    fn pinv_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            psd_pseudoinverse(&m, None),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn pinv_reproduces_low_rank() {
        let b = DMatrix::from_fn(6, 2, |i, j| ((i + 1) as f64 * 0.7 + j as f64).sin());
        let m = &b * b.transpose();
        let p = psd_pseudoinverse(&m, None).unwrap();
        assert!((&m * &p * &m - &m).abs().max() < 1e-8);
    }

    #[test]
    fn logdet_matches_product_of_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!((log_det_pd(&m).unwrap() - (1.75f64).ln()).abs() < 1e-14);
        assert!(log_det_pd(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).is_none());
    }
}
