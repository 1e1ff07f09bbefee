use std::fs::File;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PatternChoice};
use super::data::generate_data;
use crate::analysis::{completion_error, fidelity_gram, numerical_rank, rank_bound};
use crate::completion::{complete_max_det, CompletionOptions};
use crate::error::{Error, Result};
use crate::io::checksum;
use crate::kernel::{apply_shot_noise, build_kernel_matrix, DataSource, KernelMatrix};
use crate::pqc::{haar_state, resolve};
use crate::sparsity::{SparseKernelView, SparsityPattern};

/// splitmix64 finaliser, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a sub-stream identified by `tags` under `base`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(base), |acc, &t| mix(acc ^ mix(t)))
}

const STREAM_DATA: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub pattern: PatternChoice,
    /// Bandwidth for band sweeps, overlap u for two-block sweeps.
    pub sweep_value: usize,
    pub shots: u64,
    pub trial: usize,
    pub error: f64,
    pub rank: usize,
    pub u_over_r: f64,
    pub sampling_fraction: f64,
    pub repaired_blocks: usize,
    pub truth_checksum: String,
    /// Completion wall time in seconds. Kept out of the CSV so repeated runs
    /// produce identical tables.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Serialize)]
struct Timing {
    sweep_value: usize,
    shots: u64,
    trial: usize,
    wall_time: f64,
}

/// Sorts records into canonical order: sweep value, shots, trial.
pub fn canonical_order(records: &mut [SweepRecord]) {
    records.sort_by_key(|r| (r.sweep_value, r.shots, r.trial));
}

pub fn write_records_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(cfg: &ExperimentConfig, name: &str, records: &mut [SweepRecord]) -> Result<()> {
    canonical_order(records);
    let Some(dir) = &cfg.out_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    write_records_csv(File::create(dir.join(format!("{name}.csv")))?, records)?;
    let timings: Vec<Timing> = records
        .iter()
        .map(|r| Timing {
            sweep_value: r.sweep_value,
            shots: r.shots,
            trial: r.trial,
            wall_time: r.wall_time,
        })
        .collect();
    std::fs::write(
        dir.join(format!("{name}.timings.json")),
        serde_json::to_string_pretty(&timings)?,
    )?;
    Ok(())
}

/// Ground truth for one trial.
fn ground_truth(cfg: &ExperimentConfig, trial: usize) -> Result<KernelMatrix> {
    let template = resolve(&cfg.circuit, cfg.width, Some(cfg.layers))?;
    let p = template.param_count();
    let d = cfg.data.d.unwrap_or(p);
    if d < p {
        return Err(Error::ParameterArity {
            expected: p,
            got: d,
        });
    }
    let seed = derive_seed(cfg.data.seed, &[STREAM_DATA, trial as u64]);
    let data = generate_data(
        cfg.data.source,
        cfg.matrix_size(),
        d,
        seed,
        cfg.data.correlation,
        cfg.data.modes,
    )?
    .truncated(p)?;
    build_kernel_matrix(&template, &data)
}

fn pattern_for(cfg: &ExperimentConfig, value: usize) -> Result<SparsityPattern> {
    match cfg.pattern {
        PatternChoice::Band => SparsityPattern::band(cfg.n, value),
        PatternChoice::TwoBlock => SparsityPattern::two_block(cfg.n, cfg.n_new, value),
    }
}

fn run_sweep_into(cfg: &ExperimentConfig, records: &mut Vec<SweepRecord>) -> Result<()> {
    for trial in 0..cfg.trials {
        let truth = ground_truth(cfg, trial)?;
        let rank = numerical_rank(truth.values(), None);
        let sum = checksum(truth.values());
        for &shots in &cfg.shots {
            let sampled = if shots == 0 {
                truth.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    cfg.data.seed,
                    &[STREAM_NOISE, trial as u64, shots],
                ));
                apply_shot_noise(&truth, shots, &mut rng)?
            };
            for &value in &cfg.sweep {
                let pattern = pattern_for(cfg, value)?;
                let fraction = pattern.sampling_fraction();
                let view = SparseKernelView::subsample(&sampled, pattern)?;
                let start = Instant::now();
                let result = complete_max_det(&view, CompletionOptions::with_repair(shots > 0))?;
                let wall_time = start.elapsed().as_secs_f64();
                let err = completion_error(truth.values(), &result.matrix, view.pattern())?;
                records.push(SweepRecord {
                    pattern: cfg.pattern,
                    sweep_value: value,
                    shots,
                    trial,
                    error: err.error,
                    rank,
                    u_over_r: value as f64 / rank.max(1) as f64,
                    sampling_fraction: fraction,
                    repaired_blocks: result.diagnostics.repaired_blocks,
                    truth_checksum: sum.clone(),
                    wall_time,
                });
            }
        }
    }
    Ok(())
}

fn run_sweep(
    cfg: &ExperimentConfig,
    expected: PatternChoice,
    name: &str,
) -> Result<Vec<SweepRecord>> {
    if cfg.pattern != expected {
        return Err(Error::validation(format!(
            "config pattern must be {expected:?} for this sweep"
        )));
    }
    cfg.validate()?;
    let mut records = Vec::new();
    let outcome = run_sweep_into(cfg, &mut records);
    // flush whatever finished, even on failure
    let written = write_outputs(cfg, name, &mut records);
    outcome?;
    written?;
    Ok(records)
}

/// Completion error against bandwidth, one record per (bandwidth, shots, trial).
/// Noisy runs repair blocks before completing.
pub fn run_band_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    run_sweep(cfg, PatternChoice::Band, "band_sweep")
}

/// Completion error of an `N`-point kernel matrix extended by `n_new`
/// points, against the overlap u.
pub fn run_extension_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    run_sweep(cfg, PatternChoice::TwoBlock, "extension_sweep")
}

/// Kernel source for the rank survey, written as `"haar"` or a template
/// reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum RankSource {
    Haar,
    Template(String),
}

impl RankSource {
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("haar") {
            RankSource::Haar
        } else {
            RankSource::Template(s.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            RankSource::Haar => "haar",
            RankSource::Template(t) => t,
        }
    }
}

impl From<String> for RankSource {
    fn from(s: String) -> Self {
        RankSource::parse(&s)
    }
}

impl From<RankSource> for String {
    fn from(s: RankSource) -> Self {
        s.label().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub source: String,
    pub width: usize,
    pub layers: usize,
    pub n: usize,
    pub trial: usize,
    pub rank: usize,
    pub bound: usize,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSurvey {
    pub widths: Vec<usize>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub layers: usize,
    pub sources: Vec<RankSource>,
    pub seed: u64,
}

/// Kernel rank per (source, width, N, trial) with saturation against
/// `min(N, 4^w)`. Template sources encode uniform random data.
pub fn run_rank_survey(survey: &RankSurvey) -> Result<Vec<RankRecord>> {
    if survey.trials == 0 {
        return Err(Error::validation("trials must be at least 1"));
    }
    let mut out = Vec::new();
    for (si, source) in survey.sources.iter().enumerate() {
        for &w in &survey.widths {
            for &n in &survey.ns {
                let bound = rank_bound(n, w)?;
                for trial in 0..survey.trials {
                    let seed =
                        derive_seed(survey.seed, &[si as u64, w as u64, n as u64, trial as u64]);
                    let (rank, layers) = match source {
                        RankSource::Haar => {
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            let states = (0..n)
                                .map(|_| haar_state(w, &mut rng))
                                .collect::<Result<Vec<_>>>()?;
                            (numerical_rank(&fidelity_gram(&states), None), 0)
                        }
                        RankSource::Template(id) => {
                            let t = resolve(id, w, Some(survey.layers))?;
                            if t.param_count() == 0 {
                                return Err(Error::validation(format!(
                                    "template `{id}` has no parameters"
                                )));
                            }
                            let data = generate_data(
                                DataSource::UniformRandom,
                                n,
                                t.param_count(),
                                seed,
                                None,
                                None,
                            )?;
                            let k = build_kernel_matrix(&t, &data)?;
                            (numerical_rank(k.values(), None), t.layers())
                        }
                    };
                    out.push(RankRecord {
                        source: source.label().to_string(),
                        width: w,
                        layers,
                        n,
                        trial,
                        rank,
                        bound,
                        saturated: rank == bound,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn write_rank_csv<W: Write>(out: W, records: &[RankRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
