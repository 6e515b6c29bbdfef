//! Optional settings shared by the command line and the TOML config file.
//!
//! The file is a flat table whose keys are the long flag names, e.g.
//!
//! ```toml
//! formulation = "f9"
//! method = "imann"
//! arch = "2-5-5-2"
//! sizes = [4, 16, 64]
//! restarts = 20
//! seed = 7
//! out = "results/f9"
//! quad-points = 80
//! cma-max-evals = 100000
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{ExperimentConfig, Method};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Overrides {
    pub formulation: Option<String>,
    pub method: Option<String>,
    pub arch: Option<String>,
    pub sizes: Option<Vec<usize>>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quad_points: Option<usize>,
    pub cma_sigma: Option<f64>,
    pub cma_population: Option<usize>,
    pub cma_max_evals: Option<usize>,
    pub cma_target: Option<f64>,
    pub dnn_lr: Option<f64>,
    pub dnn_epochs: Option<usize>,
    pub dnn_patience: Option<usize>,
}

impl Overrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Values set in `self` win; unset ones fall back to `other`.
    pub fn or(self, other: Overrides) -> Overrides {
        Overrides {
            formulation: self.formulation.or(other.formulation),
            method: self.method.or(other.method),
            arch: self.arch.or(other.arch),
            sizes: self.sizes.or(other.sizes),
            restarts: self.restarts.or(other.restarts),
            seed: self.seed.or(other.seed),
            out: self.out.or(other.out),
            quad_points: self.quad_points.or(other.quad_points),
            cma_sigma: self.cma_sigma.or(other.cma_sigma),
            cma_population: self.cma_population.or(other.cma_population),
            cma_max_evals: self.cma_max_evals.or(other.cma_max_evals),
            cma_target: self.cma_target.or(other.cma_target),
            dnn_lr: self.dnn_lr.or(other.dnn_lr),
            dnn_epochs: self.dnn_epochs.or(other.dnn_epochs),
            dnn_patience: self.dnn_patience.or(other.dnn_patience),
        }
    }

    pub fn method(&self) -> Result<Option<Method>> {
        self.method.as_deref().map(str::parse).transpose()
    }

    /// Experiment for `formulation` and `method`, starting from the defaults
    /// and applying every set value except `formulation` and `method`.
    pub fn experiment(&self, formulation: &str, method: Method) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::new(formulation, method)?;
        if let Some(a) = &self.arch {
            c.arch = a.clone();
        }
        if let Some(s) = &self.sizes {
            c.sizes = s.clone();
        }
        if let Some(v) = self.restarts {
            c.restarts = v;
        }
        if let Some(v) = self.seed {
            c.base_seed = v;
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.quad_points {
            c.quad_points = v;
        }
        if let Some(v) = self.cma_sigma {
            c.cma.initial_sigma = v;
        }
        if self.cma_population.is_some() {
            c.cma.population = self.cma_population;
        }
        if let Some(v) = self.cma_max_evals {
            c.cma.max_evaluations = v;
        }
        if let Some(v) = self.cma_target {
            c.cma.fitness_target = v;
        }
        if let Some(v) = self.dnn_lr {
            c.dnn.learning_rate = v;
        }
        if let Some(v) = self.dnn_epochs {
            c.dnn.max_epochs = v;
        }
        if let Some(v) = self.dnn_patience {
            c.dnn.plateau_patience = v;
        }
        c.validate()?;
        Ok(c)
    }
}
