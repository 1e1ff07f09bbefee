//! Completion error, numerical rank and expressibility measurements.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pqc::{haar_state, simulate, CircuitTemplate, StateVector};
use crate::sparsity::SparsityPattern;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: f64,
    /// Unknown entries, both triangles.
    pub unknown_count: usize,
    pub frobenius_num: f64,
    pub frobenius_den: f64,
    /// Set when the pattern has no unknown entries; `error` is then 0.
    pub nothing_unknown: bool,
}

/// Relative Frobenius error over the unknown entries:
/// `||K_unknown - K_hat_unknown||_F / ||K_unknown||_F`.
pub fn completion_error(
    truth: &DMatrix<f64>,
    estimate: &DMatrix<f64>,
    pattern: &SparsityPattern,
) -> Result<ErrorReport> {
    let n = pattern.size();
    for (name, m) in [("reference", truth), ("estimate", estimate)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::validation(format!(
                "{name} matrix is {}x{}, pattern expects {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0;
    for l in 0..n {
        for m in 0..n {
            if pattern.is_known(l, m) {
                continue;
            }
            let k = truth[(l, m)];
            let d = k - estimate[(l, m)];
            num += d * d;
            den += k * k;
            count += 1;
        }
    }
    if count == 0 {
        return Ok(ErrorReport {
            error: 0.0,
            unknown_count: 0,
            frobenius_num: 0.0,
            frobenius_den: 0.0,
            nothing_unknown: true,
        });
    }
    if den == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    let (num, den) = (num.sqrt(), den.sqrt());
    Ok(ErrorReport {
        error: num / den,
        unknown_count: count,
        frobenius_num: num,
        frobenius_den: den,
        nothing_unknown: false,
    })
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Default relative rank tolerance, `n * 2^-52 * 100`.
pub fn default_rank_rel_tol(n: usize) -> f64 {
    n.max(1) as f64 * f64::EPSILON * 100.0
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: Option<f64>) -> usize {
    rank_of_spectrum(
        &singular_values(m),
        rel_tol.unwrap_or_else(|| default_rank_rel_tol(m.nrows())),
    )
}

pub fn rank_of_spectrum(sorted_desc: &[f64], rel_tol: f64) -> usize {
    let Some(&smax) = sorted_desc.first() else {
        return 0;
    };
    if smax <= 0.0 {
        return 0;
    }
    sorted_desc.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// `min(N, 4^w)`.
pub fn rank_bound(n: usize, width: usize) -> Result<usize> {
    if n == 0 || width == 0 {
        return Err(Error::validation("rank bound needs N >= 1 and w >= 1"));
    }
    if width > 31 {
        return Err(Error::validation(format!("4^{width} overflows")));
    }
    let cap = 4u64.pow(width as u32);
    Ok((n as u64).min(cap) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapCondition {
    pub satisfied: bool,
    pub ratio: f64,
}

/// The `u / r >= 1` recovery condition.
pub fn overlap_condition(overlap: usize, rank: usize) -> Result<OverlapCondition> {
    if rank == 0 {
        return Err(Error::validation("rank must be at least 1"));
    }
    let ratio = overlap as f64 / rank as f64;
    Ok(OverlapCondition {
        satisfied: ratio >= 1.0,
        ratio,
    })
}

pub const DEFAULT_BINS: usize = 75;
pub const DEFAULT_SAMPLES: usize = 5000;
pub const MIN_SAMPLES: usize = 1000;
pub const MIN_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub empirical_mass: f64,
    pub haar_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressibilityReport {
    pub kl: f64,
    /// `-ln(kl)`, absent when `kl == 0`.
    pub neg_log_kl: Option<f64>,
    pub samples: usize,
    pub bins: usize,
    pub width: usize,
    /// The template has no parameters, so every fidelity is 1.
    pub degenerate: bool,
    pub histogram: Vec<HistogramBin>,
}

impl ExpressibilityReport {
    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.histogram {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Haar probability mass of each of `bins` equal bins on [0, 1]:
/// `(1 - lo)^(2^w - 1) - (1 - hi)^(2^w - 1)`.
pub fn haar_bin_masses(width: usize, bins: usize) -> Result<Vec<f64>> {
    if width == 0 || width > 62 {
        return Err(Error::validation(format!("width {width} out of range")));
    }
    if bins == 0 {
        return Err(Error::validation("need at least one bin"));
    }
    let e = ((1u64 << width) - 1) as f64;
    Ok((0..bins)
        .map(|b| {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            (1.0 - lo).powf(e) - (1.0 - hi).powf(e)
        })
        .collect())
}

/// Bin index for a fidelity; 1 falls in the last bin.
fn bin_of(f: f64, bins: usize) -> usize {
    ((f.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

/// Discrete KL divergence of an empirical fidelity histogram against the
/// Haar law. Empty empirical bins contribute nothing.
pub fn expressibility_from_fidelities(
    fidelities: &[f64],
    bins: usize,
    width: usize,
) -> Result<ExpressibilityReport> {
    if fidelities.is_empty() {
        return Err(Error::validation("no fidelity samples"));
    }
    let haar = haar_bin_masses(width, bins)?;
    let mut counts = vec![0usize; bins];
    for &f in fidelities {
        counts[bin_of(f, bins)] += 1;
    }
    let total = fidelities.len() as f64;
    let mut kl = 0.0;
    let mut histogram = Vec::with_capacity(bins);
    for (b, (&c, &q)) in counts.iter().zip(&haar).enumerate() {
        let p = c as f64 / total;
        if p > 0.0 {
            kl += p * (p / q).ln();
        }
        histogram.push(HistogramBin {
            bin_lo: b as f64 / bins as f64,
            bin_hi: (b + 1) as f64 / bins as f64,
            empirical_mass: p,
            haar_mass: q,
        });
    }
    let kl = kl.max(0.0);
    Ok(ExpressibilityReport {
        kl,
        neg_log_kl: (kl > 0.0).then(|| -kl.ln()),
        samples: fidelities.len(),
        bins,
        width,
        degenerate: false,
        histogram,
    })
}

fn uniform_params<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Expressibility of a template: KL divergence between the fidelity
/// distribution of random parameter pairs (uniform on [0, 2pi)) and the Haar
/// fidelity law.
pub fn expressibility<R: Rng + ?Sized>(
    template: &CircuitTemplate,
    samples: usize,
    bins: usize,
    rng: &mut R,
) -> Result<ExpressibilityReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::validation(format!(
            "need at least {MIN_SAMPLES} samples"
        )));
    }
    if bins < MIN_BINS {
        return Err(Error::validation(format!("need at least {MIN_BINS} bins")));
    }
    let p = template.param_count();
    let mut fids = Vec::with_capacity(samples);
    for _ in 0..samples {
        let a = simulate(template, &uniform_params(p, rng))?;
        let b = simulate(template, &uniform_params(p, rng))?;
        fids.push(a.overlap(&b).min(1.0));
    }
    let mut report = expressibility_from_fidelities(&fids, bins, template.width())?;
    report.degenerate = p == 0;
    Ok(report)
}

/// Fidelities between pairs of independent Haar-random states.
pub fn haar_fidelity_samples<R: Rng + ?Sized>(
    width: usize,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..samples)
        .map(|_| {
            let a = haar_state(width, rng)?;
            let b = haar_state(width, rng)?;
            Ok(a.overlap(&b).min(1.0))
        })
        .collect()
}

/// Gram matrix of squared overlaps, `K_lm = |<psi_l|psi_m>|^2`.
pub fn fidelity_gram(states: &[StateVector]) -> DMatrix<f64> {
    let n = states.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for l in 0..n {
        k[(l, l)] = 1.0;
        for m in 0..l {
            let v = states[l].overlap(&states[m]).clamp(0.0, 1.0);
            k[(l, m)] = v;
            k[(m, l)] = v;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarRankReport {
    pub width: usize,
    pub n: usize,
    pub bound: usize,
    pub ranks: Vec<usize>,
    pub saturated_fraction: f64,
}

/// Ranks of kernel matrices built from `n` Haar-random states per trial,
/// against the `min(N, 4^w)` bound.
pub fn haar_rank_conjecture_check<R: Rng + ?Sized>(
    width: usize,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<HaarRankReport> {
    if trials == 0 {
        return Err(Error::validation("need at least one trial"));
    }
    let bound = rank_bound(n, width)?;
    let mut ranks = Vec::with_capacity(trials);
    for _ in 0..trials {
        let states = (0..n)
            .map(|_| haar_state(width, rng))
            .collect::<Result<Vec<_>>>()?;
        ranks.push(numerical_rank(&fidelity_gram(&states), None));
    }
    let saturated = ranks.iter().filter(|&&r| r == bound).count();
    Ok(HaarRankReport {
        width,
        n,
        bound,
        saturated_fraction: saturated as f64 / trials as f64,
        ranks,
    })
}
