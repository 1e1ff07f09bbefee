use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::check_width;
use super::sim::{StateVector, C64};
use crate::error::{Error, Result};

/// Samples a Haar-distributed unitary on `width` qubits.
///
/// QR decomposition of a complex Ginibre matrix, with the phases of R's
/// diagonal folded back into Q so the result is Haar rather than merely
/// unitary.
pub fn haar_unitary<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    check_width(width)?;
    let dim = 1usize << width;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let (mut q, r) = z.qr().unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        if n > 0.0 {
            let phase = d / n;
            q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
        }
    }
    Ok(q)
}

/// U|0...0> for a Haar-random U.
pub fn haar_state<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Result<StateVector> {
    let u = haar_unitary(width, rng)?;
    StateVector::from_amplitudes(u.column(0).iter().copied().collect())
}

fn check_fidelity(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(())
}

fn haar_dim(width: usize) -> Result<f64> {
    if width == 0 || width > 62 {
        return Err(Error::validation(format!("width {width} out of range")));
    }
    Ok((1u64 << width) as f64)
}

/// Density of the fidelity between two Haar-random states,
/// `(2^w - 1)(1 - F)^(2^w - 2)`.
pub fn haar_fidelity_pdf(width: usize, f: f64) -> Result<f64> {
    check_fidelity(f)?;
    let d = haar_dim(width)?;
    Ok((d - 1.0) * (1.0 - f).powf(d - 2.0))
}

/// Cumulative distribution of the Haar fidelity law, `1 - (1 - F)^(2^w - 1)`.
pub fn haar_fidelity_cdf(width: usize, f: f64) -> Result<f64> {
    check_fidelity(f)?;
    let d = haar_dim(width)?;
    Ok(1.0 - (1.0 - f).powf(d - 1.0))
}
