//! Maximum-determinant positive semidefinite completion on block-diagonal
//! (path clique tree) sparsity patterns.
//!
//! The walk starts from the bottom-right block and moves up the diagonal one
//! supernode at a time. With `A` the rows new to the current block, `U` the
//! rows it shares with the block below, and `R` every already-completed row
//! past the current block, the unknown entries are filled as
//!
//! ```text
//! K[A, R] = K[A, U] * pinv(K[U, U]) * K[U, R]
//! ```
//!
//! which makes `A` and `R` conditionally independent given `U`. That is the
//! zero-inverse property of the max-det completion on a chordal pattern.

mod linalg;
mod ncm;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparsity::{Block, SparseKernelView, SparsityPattern};

pub use linalg::{
    default_rank_tol, log_det_pd, min_eigenvalue, psd_pseudoinverse, symmetric_within,
};
pub use ncm::{nearest_correlation, NcmOptions};

use linalg::{is_correlation, pseudoinverse_with_rank};

/// Blocks must have `lambda_min >= -PSD_FLOOR` when repair is off.
pub const PSD_FLOOR: f64 = 1e-8;
/// Upper bound on cyclic repair sweeps over overlapping blocks.
pub const MAX_REPAIR_SWEEPS: usize = 200;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionOptions {
    /// Relative pseudoinverse cutoff; `None` uses [`default_rank_tol`] of the
    /// overlap size.
    pub rank_tol: Option<f64>,
    /// Replace every block by its nearest correlation matrix first.
    pub repair: bool,
    pub ncm: NcmOptions,
}

impl CompletionOptions {
    pub fn with_repair(repair: bool) -> Self {
        CompletionOptions {
            repair,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Supernode rows filled at this step.
    pub supernode: Block,
    pub overlap: usize,
    /// Number of overlap-block eigenvalues above the pseudoinverse cutoff.
    pub overlap_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionDiagnostics {
    pub steps: Vec<StepDiagnostics>,
    pub repaired_blocks: usize,
    pub repair_sweeps: usize,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub matrix: DMatrix<f64>,
    pub diagnostics: CompletionDiagnostics,
    /// Known entries actually used, after any repair.
    pub known: SparseKernelView,
}

/// Cyclic nearest-correlation repair of every clique until all of them are
/// valid correlation matrices at once. Overlapping cliques share entries, so a
/// single pass is not enough in general.
fn repair_blocks(view: &mut SparseKernelView, ncm: NcmOptions) -> Result<(usize, usize)> {
    let chain = view.pattern().clique_chain().to_vec();
    let mut repaired = 0;
    for sweep in 0..MAX_REPAIR_SWEEPS {
        let mut changed = false;
        for b in &chain {
            let block = view.block(b);
            if is_correlation(&block) {
                continue;
            }
            let fixed = nearest_correlation(&block, ncm)?;
            view.set_block(b, &fixed);
            repaired += 1;
            changed = true;
        }
        if !changed || chain.len() == 1 {
            return Ok((repaired, sweep + 1));
        }
    }
    Ok((repaired, MAX_REPAIR_SWEEPS))
}

/// Max-det PSD completion of `view`. Known entries are copied verbatim (after
/// repair, when enabled); only unknown entries are written.
pub fn complete_max_det(
    view: &SparseKernelView,
    opts: CompletionOptions,
) -> Result<CompletionResult> {
    let mut known = view.clone();
    let (repaired_blocks, repair_sweeps) = if opts.repair {
        repair_blocks(&mut known, opts.ncm)?
    } else {
        for (i, b) in known.pattern().clique_chain().iter().enumerate() {
            let lmin = min_eigenvalue(&known.block(b));
            if lmin < -PSD_FLOOR {
                return Err(Error::validation(format!(
                    "block {i} [{}..{}] is not PSD (lambda_min = {lmin:e}); enable repair",
                    b.start, b.end
                )));
            }
        }
        (0, 0)
    };

    let n = known.size();
    let chain = known.pattern().clique_chain().to_vec();
    let mut k = known.values().clone();
    let mut steps = Vec::with_capacity(chain.len().saturating_sub(1));

    for b in (0..chain.len().saturating_sub(1)).rev() {
        let (cur, next) = (chain[b], chain[b + 1]);
        let a0 = cur.start;
        let na = next.start - cur.start;
        let u0 = next.start;
        let nu = cur.end + 1 - next.start;
        let r0 = cur.end + 1;
        let nr = n - r0;

        let overlap_rank = if nu == 0 {
            k.view_mut((a0, r0), (na, nr)).fill(0.0);
            k.view_mut((r0, a0), (nr, na)).fill(0.0);
            0
        } else {
            let kuu = k.view((u0, u0), (nu, nu)).into_owned();
            let pinv = pseudoinverse_with_rank(&kuu, opts.rank_tol)?;
            let fill = k.view((a0, u0), (na, nu)) * &pinv.matrix * k.view((u0, r0), (nu, nr));
            k.view_mut((a0, r0), (na, nr)).copy_from(&fill);
            k.view_mut((r0, a0), (nr, na)).copy_from(&fill.transpose());
            pinv.rank
        };
        steps.push(StepDiagnostics {
            supernode: Block::new(a0, next.start - 1),
            overlap: nu,
            overlap_rank,
        });
    }

    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "completion produced non-finite entries".into(),
        ));
    }
    let min_eig = min_eigenvalue(&k);
    Ok(CompletionResult {
        matrix: k,
        diagnostics: CompletionDiagnostics {
            steps,
            repaired_blocks,
            repair_sweeps,
            min_eigenvalue: min_eig,
        },
        known,
    })
}

/// Largest `|inv(K)_lm|` over unknown `(l, m)`, relative to the largest
/// entry of the inverse. `None` when `K` is not strictly positive definite
/// or nothing is unknown.
pub fn inverse_sparsity_violation(matrix: &DMatrix<f64>, pattern: &SparsityPattern) -> Option<f64> {
    if pattern.unknown_count() == 0 {
        return None;
    }
    let inv = nalgebra::Cholesky::new(matrix.clone())?.inverse();
    let scale = inv.abs().max();
    let n = matrix.nrows();
    let worst = (0..n)
        .flat_map(|l| (0..l).map(move |m| (l, m)))
        .filter(|&(l, m)| !pattern.is_known(l, m))
        .map(|(l, m)| inv[(l, m)].abs().max(inv[(m, l)].abs()))
        .fold(0.0, f64::max);
    Some(worst / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub passed: bool,
    /// Largest observed violation: relative inverse entry, or log-det gain.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Set when the checks could not run (completion not strictly PD).
    pub skipped: Option<String>,
    pub inverse_sparsity: CheckOutcome,
    pub local_maximality: CheckOutcome,
    /// Perturbations that kept the matrix PD and were evaluated.
    pub trials_evaluated: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.skipped.is_none() && self.inverse_sparsity.passed && self.local_maximality.passed
    }
}

pub const INVERSE_SPARSITY_TOL: f64 = 1e-6;
pub const PERTURBATION_NORM: f64 = 1e-3;
pub const LOGDET_SLACK: f64 = 1e-9;

/// Checks a completion for the two max-det certificates: zero inverse
/// entries off the pattern, and no log-det gain under small symmetric
/// perturbations of the unknown entries.
pub fn verify_max_det<R: Rng + ?Sized>(
    result: &CompletionResult,
    view: &SparseKernelView,
    trials: usize,
    rng: &mut R,
) -> VerificationReport {
    let pattern = view.pattern();
    let vacuous = CheckOutcome {
        passed: true,
        worst: 0.0,
    };
    let n = result.matrix.nrows();
    let unknown: Vec<(usize, usize)> = (0..n)
        .flat_map(|l| (0..l).map(move |m| (l, m)))
        .filter(|&(l, m)| !pattern.is_known(l, m))
        .collect();
    if unknown.is_empty() {
        return VerificationReport {
            skipped: None,
            inverse_sparsity: vacuous.clone(),
            local_maximality: vacuous,
            trials_evaluated: 0,
        };
    }
    let Some(base) = log_det_pd(&result.matrix) else {
        return VerificationReport {
            skipped: Some("completion is not strictly positive definite".into()),
            inverse_sparsity: vacuous.clone(),
            local_maximality: vacuous,
            trials_evaluated: 0,
        };
    };
    let violation = inverse_sparsity_violation(&result.matrix, pattern).unwrap_or(0.0);

    let mut evaluated = 0;
    let mut worst_gain = f64::NEG_INFINITY;
    let max_attempts = trials.saturating_mul(20).max(1);
    for _ in 0..max_attempts {
        if evaluated == trials {
            break;
        }
        let coeffs: Vec<f64> = unknown.iter().map(|_| rng.sample(StandardNormal)).collect();
        let norm = (2.0 * coeffs.iter().map(|c| c * c).sum::<f64>()).sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut perturbed = result.matrix.clone();
        for (&(l, m), c) in unknown.iter().zip(&coeffs) {
            let e = c / norm * PERTURBATION_NORM;
            perturbed[(l, m)] += e;
            perturbed[(m, l)] += e;
        }
        if let Some(ld) = log_det_pd(&perturbed) {
            worst_gain = worst_gain.max(ld - base);
            evaluated += 1;
        }
    }
    let worst_gain = if evaluated == 0 { 0.0 } else { worst_gain };
    VerificationReport {
        skipped: None,
        inverse_sparsity: CheckOutcome {
            passed: violation < INVERSE_SPARSITY_TOL,
            worst: violation,
        },
        local_maximality: CheckOutcome {
            passed: worst_gain <= LOGDET_SLACK,
            worst: worst_gain,
        },
        trials_evaluated: evaluated,
    }
}
