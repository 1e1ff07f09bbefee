//! Fidelity kernel matrices built from simulated feature states.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pqc::{fidelity, simulate, CircuitTemplate, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    UniformRandom,
    CorrelatedSynthetic,
    File,
}

/// Rows are feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    points: DMatrix<f64>,
    source: DataSource,
    seed: Option<u64>,
}

impl DataSet {
    pub fn new(points: DMatrix<f64>, source: DataSource, seed: Option<u64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::validation(
                "data set needs at least one point and one feature",
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("data set contains non-finite values"));
        }
        Ok(DataSet {
            points,
            source,
            seed,
        })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// Keeps the first `d` features; fails if fewer are available.
    pub fn truncated(&self, d: usize) -> Result<DataSet> {
        if d > self.dim() {
            return Err(Error::ParameterArity {
                expected: d,
                got: self.dim(),
            });
        }
        DataSet::new(
            self.points.columns(0, d).into_owned(),
            self.source,
            self.seed,
        )
    }

    /// First `n` points.
    pub fn head(&self, n: usize) -> Result<DataSet> {
        if n > self.len() {
            return Err(Error::validation(format!(
                "requested {n} points from a set of {}",
                self.len()
            )));
        }
        DataSet::new(self.points.rows(0, n).into_owned(), self.source, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub circuit_id: String,
    pub width: usize,
    pub layers: usize,
    /// 0 means exact (noise-free) entries.
    pub shots: u64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
    meta: KernelMeta,
}

impl KernelMatrix {
    /// Checks shape, symmetry (1e-12) and the [0, 1] entry range.
    pub fn new(values: DMatrix<f64>, meta: KernelMeta) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(Error::validation(
                "kernel matrix must be square and non-empty",
            ));
        }
        let n = values.nrows();
        for l in 0..n {
            for m in 0..=l {
                let v = values[(l, m)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::validation(format!(
                        "entry ({l},{m}) = {v} outside [0, 1]"
                    )));
                }
                if (v - values[(m, l)]).abs() > 1e-12 {
                    return Err(Error::validation(format!(
                        "kernel matrix not symmetric at ({l},{m})"
                    )));
                }
            }
        }
        Ok(KernelMatrix { values, meta })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_exact(&self) -> bool {
        self.meta.shots == 0
    }
}

/// k(x_l, x_m): the fidelity between the two feature states.
pub fn kernel_entry(template: &CircuitTemplate, x_l: &[f64], x_m: &[f64]) -> Result<f64> {
    fidelity(template, x_l, x_m)
}

fn feature_states(template: &CircuitTemplate, data: &DataSet) -> Result<Vec<StateVector>> {
    if data.dim() != template.param_count() {
        return Err(Error::ParameterArity {
            expected: template.param_count(),
            got: data.dim(),
        });
    }
    (0..data.len())
        .map(|i| simulate(template, &data.row(i)))
        .collect()
}

/// Exact kernel matrix. Each feature state is simulated once; the lower
/// triangle is filled from overlaps and mirrored, the diagonal is exactly 1.
pub fn build_kernel_matrix(template: &CircuitTemplate, data: &DataSet) -> Result<KernelMatrix> {
    let states = feature_states(template, data)?;
    let n = states.len();
    let mut values = DMatrix::<f64>::zeros(n, n);
    for l in 0..n {
        values[(l, l)] = 1.0;
        for m in 0..l {
            let k = states[l].overlap(&states[m]).clamp(0.0, 1.0);
            values[(l, m)] = k;
            values[(m, l)] = k;
        }
    }
    Ok(KernelMatrix {
        values,
        meta: KernelMeta {
            circuit_id: template.id().to_string(),
            width: template.width(),
            layers: template.layers(),
            shots: 0,
            seed: data.seed(),
        },
    })
}

/// Replaces every off-diagonal entry by a `Binomial(shots, K_lm) / shots`
/// estimate, one draw per unordered pair in row-major lower-triangle order.
/// The diagonal stays at 1. The result need not be positive semidefinite.
pub fn apply_shot_noise<R: Rng + ?Sized>(
    kernel: &KernelMatrix,
    shots: u64,
    rng: &mut R,
) -> Result<KernelMatrix> {
    if shots < 1 {
        return Err(Error::validation("shot count must be at least 1"));
    }
    if !kernel.is_exact() {
        return Err(Error::DoubleNoise {
            shots: kernel.meta.shots,
        });
    }
    let n = kernel.size();
    let mut values = kernel.values.clone();
    let r = shots as f64;
    for l in 0..n {
        values[(l, l)] = 1.0;
        for m in 0..l {
            let p = kernel.values[(l, m)].clamp(0.0, 1.0);
            let dist = Binomial::new(shots, p).map_err(|e| Error::Numerical(e.to_string()))?;
            let k = dist.sample(rng) as f64 / r;
            values[(l, m)] = k;
            values[(m, l)] = k;
        }
    }
    Ok(KernelMatrix {
        values,
        meta: KernelMeta {
            shots,
            ..kernel.meta.clone()
        },
    })
}
