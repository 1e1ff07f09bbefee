use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::linalg::{is_correlation, project_psd, symmetric_within};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NcmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NcmOptions {
    fn default() -> Self {
        NcmOptions {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

fn with_unit_diagonal(mut m: DMatrix<f64>) -> DMatrix<f64> {
    m.fill_diagonal(1.0);
    m
}

/// Scales a PSD matrix with positive diagonal to unit diagonal, D^-1/2 X D^-1/2.
fn rescale_to_correlation(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d: Vec<f64> = x.diagonal().iter().copied().collect();
    if let Some(i) = d.iter().position(|&v| v <= 1e-12) {
        return Err(Error::Numerical(format!(
            "vanishing diagonal entry {i} in correlation repair"
        )));
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut out = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * s[i] * s[j]);
    out.fill_diagonal(1.0);
    Ok(out)
}

/// Frobenius-nearest correlation matrix (PSD, unit diagonal).
///
/// Alternating projections between the PSD cone and the unit-diagonal set
/// with Dykstra's correction on the cone step. On convergence the PSD iterate
/// is rescaled to unit diagonal, so the result is PSD up to rounding and its
/// diagonal is exactly one. Valid correlation matrices are returned as-is.
pub fn nearest_correlation(block: &DMatrix<f64>, opts: NcmOptions) -> Result<DMatrix<f64>> {
    if !block.is_square() {
        return Err(Error::validation(
            "correlation repair needs a square matrix",
        ));
    }
    if block.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("correlation repair input is not finite"));
    }
    if !symmetric_within(block, 1e-10) {
        return Err(Error::validation(
            "correlation repair input is not symmetric",
        ));
    }
    if let Some(i) = block.diagonal().iter().position(|d| (d - 1.0).abs() > 0.5) {
        return Err(Error::validation(format!(
            "diagonal entry {i} = {} too far from 1",
            block[(i, i)]
        )));
    }
    if is_correlation(block) {
        return Ok(block.clone());
    }

    let a = (block + block.transpose()) * 0.5;
    let mut y = a.clone();
    let mut correction = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let r = &y - &correction;
        let x = project_psd(&r);
        correction = &x - &r;
        let y_next = with_unit_diagonal(x.clone());
        residual = (&y_next - &y).norm() / y_next.norm();
        y = y_next;
        if residual < opts.tol {
            return rescale_to_correlation(&x);
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual,
        best: Box::new(y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::linalg::min_eigenvalue;

    #[test]
    fn valid_input_is_a_fixed_point() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let out = nearest_correlation(&m, NcmOptions::default()).unwrap();
        assert!((out - &m).abs().max() < 1e-12);
    }

    #[test]
    fn two_by_two_clamps_off_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        let out = nearest_correlation(&m, NcmOptions::default()).unwrap();
        let want = DMatrix::from_element(2, 2, 1.0);
        assert!((out - want).abs().max() < 1e-6);
    }

    #[test]
    fn indefinite_three_by_three() {
        // spectrum {-0.1, 0.9, 2.2}; the trace is 3 and the diagonal lands
        // within the accepted distance of 1
        let s = (1.0f64 / 3.0).sqrt();
        let t = (1.0f64 / 2.0).sqrt();
        let u = (1.0f64 / 6.0).sqrt();
        let q = DMatrix::from_row_slice(3, 3, &[s, t, u, s, -t, u, s, 0.0, -2.0 * u]);
        let lam = nalgebra::DVector::from_vec(vec![2.2, -0.1, 0.9]);
        let m = &q * DMatrix::from_diagonal(&lam) * q.transpose();
        let m = (&m + m.transpose()) * 0.5;
        assert!((min_eigenvalue(&m) + 0.1).abs() < 1e-12);

        let out = nearest_correlation(&m, NcmOptions::default()).unwrap();
        assert!(out.diagonal().iter().all(|&d| d == 1.0));
        assert!(min_eigenvalue(&out) >= -1e-10);
        assert!(symmetric_within(&out, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let far = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(nearest_correlation(&far, NcmOptions::default()).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(nearest_correlation(&asym, NcmOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_carries_iterate() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let err = nearest_correlation(
            &m,
            NcmOptions {
                tol: 1e-15,
                max_iter: 2,
            },
        )
        .unwrap_err();
        match err {
            Error::Convergence {
                iterations, best, ..
            } => {
                assert_eq!(iterations, 2);
                assert_eq!(best.nrows(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
