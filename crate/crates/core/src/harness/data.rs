use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::kernel::{DataSet, DataSource};

/// Share of latent variance carried by the mode mean when `modes > 1`.
pub const MODE_SHARE: f64 = 0.5;
/// AR(1) coefficient used by the correlated generator when none is given.
pub const DEFAULT_CORRELATION: f64 = 0.9;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn to_angle(p: f64) -> f64 {
    let v = p * TAU;
    if v >= TAU {
        TAU.next_down()
    } else {
        v.max(0.0)
    }
}

/// Synthetic feature vectors with entries in [0, 2pi).
///
/// * `UniformRandom`: i.i.d. uniform entries.
/// * `CorrelatedSynthetic`: a Gaussian copula. Latent vectors follow an AR(1)
///   process across features (correlation `rho^|i-j|`); with `modes > 1`
///   each point is pulled toward one of `modes` random cluster means. The
///   latent values go through the standard normal CDF and are scaled to
///   [0, 2pi).
///
/// Deterministic for a fixed seed.
pub fn generate_data(
    source: DataSource,
    n: usize,
    d: usize,
    seed: u64,
    correlation: Option<f64>,
    modes: Option<usize>,
) -> Result<DataSet> {
    if n == 0 || d == 0 {
        return Err(Error::validation("data generation needs N >= 1 and d >= 1"));
    }
    if let Some(rho) = correlation {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::validation(format!(
                "correlation {rho} outside [0, 1)"
            )));
        }
    }
    if modes == Some(0) {
        return Err(Error::validation("modes must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match source {
        DataSource::UniformRandom => DMatrix::from_fn(n, d, |_, _| rng.random_range(0.0..TAU)),
        DataSource::CorrelatedSynthetic => {
            let rho = correlation.unwrap_or(DEFAULT_CORRELATION);
            let innovation = (1.0 - rho * rho).sqrt();
            let modes = modes.unwrap_or(1);
            let means: Vec<Vec<f64>> = if modes > 1 {
                (0..modes)
                    .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
                    .collect()
            } else {
                vec![vec![0.0; d]]
            };
            let share = if modes > 1 { MODE_SHARE } else { 0.0 };
            let (a, b) = ((1.0 - share).sqrt(), share.sqrt());
            let mut points = DMatrix::<f64>::zeros(n, d);
            for i in 0..n {
                let mode = if modes > 1 {
                    rng.random_range(0..modes)
                } else {
                    0
                };
                let mut z: f64 = rng.sample(StandardNormal);
                for j in 0..d {
                    if j > 0 {
                        let g: f64 = rng.sample(StandardNormal);
                        z = rho * z + innovation * g;
                    }
                    points[(i, j)] = to_angle(std_normal_cdf(a * z + b * means[mode][j]));
                }
            }
            points
        }
        DataSource::File => {
            return Err(Error::validation(
                "file data is loaded with load_data_csv, not generated",
            ))
        }
    };
    DataSet::new(points, source, Some(seed))
}

/// Reads a headerless CSV of feature rows.
pub fn load_data_csv(path: &Path) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::validation(format!("bad value `{f}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::validation("ragged data file"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    DataSet::new(
        DMatrix::from_row_slice(rows.len(), d, &flat),
        DataSource::File,
        None,
    )
}
