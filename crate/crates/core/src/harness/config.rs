use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DataSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternChoice {
    Band,
    TwoBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Feature count; defaults to the template's parameter count. Extra
    /// features are truncated.
    #[serde(default)]
    pub d: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub correlation: Option<f64>,
    #[serde(default)]
    pub modes: Option<usize>,
}

fn default_trials() -> usize {
    5
}

fn default_layers() -> usize {
    1
}

/// One sweep experiment. For `band` the matrix has `N` rows; for `two_block`
/// it has `N + n_new` rows and the sweep values are overlaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in template id or path to a template JSON file.
    pub circuit: String,
    pub width: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    #[serde(default)]
    pub n_new: usize,
    pub pattern: PatternChoice,
    pub sweep: Vec<usize>,
    /// Shot counts; 0 means exact kernel values.
    pub shots: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub data: DataConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rows of the ground-truth matrix.
    pub fn matrix_size(&self) -> usize {
        match self.pattern {
            PatternChoice::Band => self.n,
            PatternChoice::TwoBlock => self.n + self.n_new,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("N must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials must be at least 1"));
        }
        if self.sweep.is_empty() || self.shots.is_empty() {
            return Err(Error::validation("sweep and shots must be non-empty"));
        }
        match self.pattern {
            PatternChoice::Band => {
                if let Some(&w) = self.sweep.iter().find(|&&w| w > self.n - 1) {
                    return Err(Error::validation(format!(
                        "bandwidth {w} exceeds N - 1 = {}",
                        self.n - 1
                    )));
                }
            }
            PatternChoice::TwoBlock => {
                if self.n_new == 0 {
                    return Err(Error::validation("two-block sweeps need n_new >= 1"));
                }
                if let Some(&u) = self.sweep.iter().find(|&&u| u > self.n) {
                    return Err(Error::validation(format!(
                        "overlap {u} exceeds N = {}",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }
}
