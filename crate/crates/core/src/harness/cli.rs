use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::data::{generate_data, load_data_csv};
use super::sweep::{
    derive_seed, run_band_sweep, run_extension_sweep, run_rank_survey, write_rank_csv,
    write_records_csv, RankSource, RankSurvey, SweepRecord,
};
use crate::analysis::{
    completion_error, expressibility, numerical_rank, singular_values, DEFAULT_BINS,
    DEFAULT_SAMPLES,
};
use crate::completion::{
    complete_max_det, inverse_sparsity_violation, CompletionOptions, StepDiagnostics,
};
use crate::error::{Error, Result};
use crate::io::{read_kernel, read_matrix, write_kernel, write_matrix};
use crate::kernel::{apply_shot_noise, build_kernel_matrix, DataSource};
use crate::pqc::resolve;
use crate::sparsity::{SparseKernelView, SparsityPattern};

#[derive(Debug, Parser)]
#[command(
    name = "qkext",
    version,
    about = "Quantum kernel matrix completion toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a kernel matrix for a circuit and data set.
    GenKernel(GenKernelArgs),
    /// Keep only the entries of a kernel matrix inside a sparsity pattern.
    Subsample(SubsampleArgs),
    /// Max-det completion of a saved view.
    Complete(CompleteArgs),
    /// Relative Frobenius error over the unknown entries.
    Error(ErrorArgs),
    /// Numerical rank of a stored matrix.
    Rank(RankArgs),
    /// KL divergence of a circuit's fidelity distribution from the Haar law.
    Expressibility(ExpressibilityArgs),
    /// Completion error against bandwidth.
    SweepBand(SweepArgs),
    /// Completion error of a two-block extension against overlap.
    SweepExtend(SweepArgs),
    /// Kernel rank against circuit width and N.
    RankSurvey(RankSurveyArgs),
}

#[derive(Debug, Args)]
struct CircuitArgs {
    /// Built-in template id or template JSON path.
    #[arg(long)]
    circuit: String,
    #[arg(long)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
}

#[derive(Debug, Args)]
struct GenKernelArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    /// Headerless CSV of feature rows. Without it, data is generated.
    #[arg(long, conflicts_with_all = ["source", "n"])]
    data: Option<PathBuf>,
    #[arg(long, value_parser = parse_source)]
    source: Option<DataSource>,
    #[arg(long = "N", alias = "n")]
    n: Option<usize>,
    /// Generated feature count; defaults to the parameter count.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    correlation: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    /// Measurement shots per entry, 0 for exact values.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "shape", required = true, multiple = false)]
struct PatternArgs {
    /// Band pattern with this bandwidth.
    #[arg(long, group = "shape")]
    band: Option<usize>,
    /// Two-block pattern `N_OLD,N_NEW,U`.
    #[arg(
        long,
        group = "shape",
        value_delimiter = ',',
        value_name = "N_OLD,N_NEW,U"
    )]
    two_block: Option<Vec<usize>>,
    /// Pattern JSON file.
    #[arg(long, group = "shape")]
    pattern: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SubsampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    pattern: PatternArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompleteArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Project every known block onto the correlation matrices first.
    #[arg(long)]
    repair: bool,
    /// Relative eigenvalue cutoff for overlap pseudoinverses.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Diagnostics JSON path, default `<out>.diagnostics.json`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ErrorArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// View or pattern JSON defining the unknown entries.
    #[arg(long)]
    pattern: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Relative singular value cutoff.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Also print the singular values, one per line.
    #[arg(long)]
    spectrum: bool,
}

#[derive(Debug, Args)]
struct ExpressibilityArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    seed: u64,
    /// Histogram CSV path.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the config's data seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RankSurveyArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    #[arg(long = "ns", value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// `haar` and/or template references.
    #[arg(long, value_delimiter = ',', default_value = "haar")]
    sources: Vec<String>,
    #[arg(long)]
    seed: u64,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_source(s: &str) -> std::result::Result<DataSource, String> {
    match s {
        "uniform_random" => Ok(DataSource::UniformRandom),
        "correlated_synthetic" => Ok(DataSource::CorrelatedSynthetic),
        _ => Err(format!(
            "unknown source `{s}` (uniform_random, correlated_synthetic)"
        )),
    }
}

#[derive(Serialize)]
struct CompletionReport<'a> {
    steps: &'a [StepDiagnostics],
    repaired_blocks: usize,
    repair_sweeps: usize,
    min_eigenvalue: f64,
    inverse_sparsity_max_violation: Option<f64>,
}

/// Runs the command line and returns the process exit code: 0 on success, 1
/// on usage or validation errors, 2 on numerical failures.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenKernel(a) => gen_kernel(a),
        Command::Subsample(a) => subsample(a),
        Command::Complete(a) => complete(a),
        Command::Error(a) => error(a),
        Command::Rank(a) => rank(a),
        Command::Expressibility(a) => express(a),
        Command::SweepBand(a) => sweep(a, run_band_sweep),
        Command::SweepExtend(a) => sweep(a, run_extension_sweep),
        Command::RankSurvey(a) => rank_survey(a),
    }
}

fn gen_kernel(a: GenKernelArgs) -> Result<()> {
    let template = resolve(&a.circuit.circuit, a.circuit.width, Some(a.circuit.layers))?;
    let p = template.param_count();
    let data = match &a.data {
        Some(path) => load_data_csv(path)?,
        None => {
            let n =
                a.n.ok_or_else(|| Error::validation("--N is required when --data is absent"))?;
            let source = a.source.unwrap_or(DataSource::UniformRandom);
            let d = a.d.unwrap_or(p);
            generate_data(source, n, d, a.seed, a.correlation, a.modes)?
        }
    };
    if data.dim() < p {
        return Err(Error::ParameterArity {
            expected: p,
            got: data.dim(),
        });
    }
    let mut kernel = build_kernel_matrix(&template, &data.truncated(p)?)?;
    if a.shots > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(a.seed, &[2, a.shots]));
        kernel = apply_shot_noise(&kernel, a.shots, &mut rng)?;
    }
    write_kernel(&a.out, &kernel)
}

fn load_pattern(args: &PatternArgs, n: usize) -> Result<SparsityPattern> {
    let pattern = if let Some(w) = args.band {
        SparsityPattern::band(n, w)?
    } else if let Some(v) = &args.two_block {
        let [n_old, n_new, u] = v[..] else {
            return Err(Error::validation("--two-block takes N_OLD,N_NEW,U"));
        };
        SparsityPattern::two_block(n_old, n_new, u)?
    } else if let Some(path) = &args.pattern {
        SparsityPattern::load(path)?
    } else {
        return Err(Error::validation("no pattern given"));
    };
    if pattern.size() != n {
        return Err(Error::validation(format!(
            "pattern covers {} rows, matrix has {n}",
            pattern.size()
        )));
    }
    Ok(pattern)
}

fn subsample(a: SubsampleArgs) -> Result<()> {
    let kernel = read_kernel(&a.input)?;
    let pattern = load_pattern(&a.pattern, kernel.size())?;
    SparseKernelView::subsample(&kernel, pattern)?.save(&a.out)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn complete(a: CompleteArgs) -> Result<()> {
    let view = SparseKernelView::load(&a.input)?;
    let opts = CompletionOptions {
        rank_tol: a.rank_tol,
        ..CompletionOptions::with_repair(a.repair)
    };
    let result = complete_max_det(&view, opts)?;
    write_matrix(&a.out, &result.matrix, view.meta())?;
    let d = &result.diagnostics;
    let report = CompletionReport {
        steps: &d.steps,
        repaired_blocks: d.repaired_blocks,
        repair_sweeps: d.repair_sweeps,
        min_eigenvalue: d.min_eigenvalue,
        inverse_sparsity_max_violation: inverse_sparsity_violation(&result.matrix, view.pattern()),
    };
    let path = a
        .diagnostics
        .unwrap_or_else(|| with_suffix(&a.out, ".diagnostics.json"));
    std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

/// Writes `text` and a newline to stdout. A closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

/// Accepts either a saved view or a bare pattern file.
fn pattern_from_file(path: &Path) -> Result<SparsityPattern> {
    let text = std::fs::read_to_string(path)?;
    match SparseKernelView::from_json(&text) {
        Ok(view) => Ok(view.pattern().clone()),
        Err(_) => SparsityPattern::from_json(&text),
    }
}

fn error(a: ErrorArgs) -> Result<()> {
    let (truth, _) = read_matrix(&a.truth)?;
    let (estimate, _) = read_matrix(&a.estimate)?;
    let pattern = pattern_from_file(&a.pattern)?;
    let report = completion_error(&truth, &estimate, &pattern)?;
    emit(&serde_json::to_string_pretty(&report)?)
}

fn rank(a: RankArgs) -> Result<()> {
    let (m, _) = read_matrix(&a.input)?;
    let mut text = numerical_rank(&m, a.rel_tol).to_string();
    if a.spectrum {
        for s in singular_values(&m) {
            text.push_str(&format!("\n{s:e}"));
        }
    }
    emit(&text)
}

#[derive(Serialize)]
struct ExpressibilitySummary<'a> {
    circuit: &'a str,
    layers: usize,
    kl: f64,
    neg_log_kl: Option<f64>,
    samples: usize,
    bins: usize,
    width: usize,
    degenerate: bool,
}

fn express(a: ExpressibilityArgs) -> Result<()> {
    let template = resolve(&a.circuit.circuit, a.circuit.width, Some(a.circuit.layers))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let report = expressibility(&template, a.samples, a.bins, &mut rng)?;
    if let Some(path) = &a.histogram {
        report.write_histogram_csv(std::fs::File::create(path)?)?;
    }
    let summary = ExpressibilitySummary {
        circuit: template.id(),
        layers: template.layers(),
        kl: report.kl,
        neg_log_kl: report.neg_log_kl,
        samples: report.samples,
        bins: report.bins,
        width: report.width,
        degenerate: report.degenerate,
    };
    emit(&serde_json::to_string_pretty(&summary)?)
}

fn sweep(a: SweepArgs, runner: fn(&ExperimentConfig) -> Result<Vec<SweepRecord>>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if a.out_dir.is_some() {
        cfg.out_dir = a.out_dir;
    }
    if let Some(seed) = a.seed {
        cfg.data.seed = seed;
    }
    let records = runner(&cfg)?;
    if cfg.out_dir.is_none() {
        write_records_csv(std::io::stdout().lock(), &records)?;
    }
    Ok(())
}

fn rank_survey(a: RankSurveyArgs) -> Result<()> {
    let survey = RankSurvey {
        widths: a.widths,
        ns: a.ns,
        trials: a.trials,
        layers: a.layers,
        sources: a.sources.iter().map(|s| RankSource::parse(s)).collect(),
        seed: a.seed,
    };
    let records = run_rank_survey(&survey)?;
    match &a.out {
        Some(path) => write_rank_csv(std::fs::File::create(path)?, &records),
        None => write_rank_csv(std::io::stdout().lock(), &records),
    }
}
