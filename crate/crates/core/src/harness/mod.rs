//! Experiment orchestration: grid datasets, seeded training attempts, best-of-k
//! selection by error integral, and dataset-size sweeps.
//!
//! Every attempt is independent and seeded from the base seed, the size index
//! and the restart index, so attempts may run in any order or in parallel.
//! Results are sorted by `(dataset_size, restart_index)` before they are
//! returned, which makes the output independent of scheduling.

mod config;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{dnn_forward, train_dnn, DnnSpec, TrainConfig};
use crate::benchmarks::{formulation, ModelFormulation};
use crate::cmaes::{default_population, optimize, CmaConfig, Termination, DEFAULT_INITIAL_SIGMA};
use crate::hybrid::{objective_for, Dataset, HybridPredictor};
use crate::network::{NetworkSpec, WeightVector};
use crate::quadrature::{error_integral, gauss_legendre_rule, Domain, DEFAULT_POINTS_PER_DIM};
use crate::{Error, Result};

pub use config::Overrides;
pub use io::{emit_csv, emit_plot_data, read_csv, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Imann,
    Dnn,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Imann, Method::Dnn];
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "imann" => Ok(Method::Imann),
            "dnn" => Ok(Method::Dnn),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}` (expected imann or dnn)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Method::Imann => "imann",
            Method::Dnn => "dnn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// The optimizer stopped early; the record holds its best-so-far result.
    Aborted,
    /// No usable predictor was produced (e.g. non-finite predictions).
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Status::Ok => "ok",
            Status::Aborted => "aborted",
            Status::Failed => "failed",
        })
    }
}

/// One training attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub formulation: String,
    pub method: Method,
    pub arch: String,
    pub dataset_size: usize,
    pub restart_index: usize,
    pub seed: u64,
    /// Sum of squared residuals on the training points.
    pub fitness: f64,
    pub error_integral: f64,
    /// Objective evaluations (imann) or training epochs (dnn).
    pub evals: usize,
    pub wall_time_ms: u64,
    pub status: Status,
}

impl RunRecord {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| RunRecord {
            wall_time_ms: 0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaSettings {
    pub initial_sigma: f64,
    /// `None` selects `4 + ⌊3 ln D⌋`.
    pub population: Option<usize>,
    pub max_evaluations: usize,
    pub fitness_target: f64,
}

impl Default for CmaSettings {
    fn default() -> Self {
        Self {
            initial_sigma: DEFAULT_INITIAL_SIGMA,
            population: None,
            max_evaluations: 100_000,
            fitness_target: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnnSettings {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub plateau_patience: usize,
}

impl Default for DnnSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            max_epochs: t.max_epochs,
            plateau_patience: t.plateau_patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub formulation: String,
    pub method: Method,
    pub arch: String,
    pub sizes: Vec<usize>,
    pub restarts: usize,
    pub base_seed: u64,
    pub quad_points: usize,
    pub cma: CmaSettings,
    pub dnn: DnnSettings,
    pub out_dir: PathBuf,
}

/// Architecture used when none is given: 1-5-5-k / 2-5-5-2 for the hybrid,
/// 1-32-16-16-1 / 2-32-32-16-1 for the dense baseline.
pub fn default_arch(method: Method, formulation: &ModelFormulation) -> String {
    match (method, formulation.dimension()) {
        (Method::Imann, d) => format!("{d}-5-5-{}", formulation.subfunction_count),
        (Method::Dnn, 1) => "1-32-16-16-1".into(),
        (Method::Dnn, _) => "2-32-32-16-1".into(),
    }
}

/// Dataset sizes swept when none are given.
pub fn default_sizes(dimension: usize) -> Vec<usize> {
    if dimension == 1 {
        vec![3, 5, 9, 17, 33, 65]
    } else {
        vec![4, 16, 64, 256]
    }
}

impl ExperimentConfig {
    /// Defaults for `formulation_id` and `method`: default architecture and
    /// sizes, 20 restarts, seed 0, 80 quadrature points per dimension.
    pub fn new(formulation_id: &str, method: Method) -> Result<Self> {
        let f = formulation(formulation_id)?;
        Ok(Self {
            formulation: f.id.to_string(),
            method,
            arch: default_arch(method, &f),
            sizes: default_sizes(f.dimension()),
            restarts: 20,
            base_seed: 0,
            quad_points: DEFAULT_POINTS_PER_DIM,
            cma: CmaSettings::default(),
            dnn: DnnSettings::default(),
            out_dir: PathBuf::from("results"),
        })
    }

    pub fn model(&self) -> Result<ModelFormulation> {
        formulation(&self.formulation)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.model()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if self.sizes.is_empty() {
            return bad("at least one dataset size is required".into());
        }
        for &n in &self.sizes {
            grid_per_dim(f.dimension(), n)?;
        }
        gauss_legendre_rule(self.quad_points)?;
        match self.method {
            Method::Imann => {
                let spec: NetworkSpec = self.arch.parse()?;
                if spec.n_in != f.dimension() || spec.n_out != f.subfunction_count {
                    return bad(format!(
                        "architecture {} does not fit {} ({} inputs, {} subfunctions)",
                        self.arch,
                        f.id,
                        f.dimension(),
                        f.subfunction_count
                    ));
                }
                let d = spec.dimensionality();
                let lambda = self.cma.population.unwrap_or_else(|| default_population(d));
                CmaConfig {
                    population: lambda,
                    initial_sigma: self.cma.initial_sigma,
                    max_evaluations: self.cma.max_evaluations,
                    fitness_target: self.cma.fitness_target,
                    ..CmaConfig::new(d, 0)
                }
                .validate()?;
            }
            Method::Dnn => {
                let spec: DnnSpec = self.arch.parse()?;
                if spec.n_in() != f.dimension() {
                    return bad(format!(
                        "architecture {} expects {} inputs, {} has {}",
                        self.arch,
                        spec.n_in(),
                        f.id,
                        f.dimension()
                    ));
                }
                self.train_config(0).validate()?;
            }
        }
        Ok(())
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.dnn.learning_rate,
            max_epochs: self.dnn.max_epochs,
            plateau_patience: self.dnn.plateau_patience,
            seed,
        }
    }
}

/// Seed of attempt `restart_index` at position `size_index` of the size list.
pub fn attempt_seed(base_seed: u64, size_index: usize, restart_index: usize) -> u64 {
    base_seed ^ (size_index as u64 * 1000 + restart_index as u64)
}

/// Equispaced points per axis, endpoints included (a single point sits at the
/// midpoint). Two-dimensional grids are the row-major Cartesian product with
/// the first coordinate varying slowest.
pub fn sample_grid(domain: &Domain, per_dim: usize) -> Result<Vec<Vec<f64>>> {
    if per_dim == 0 {
        return Err(Error::InvalidConfig("grid needs at least one point per axis".into()));
    }
    let axes: Vec<Vec<f64>> = domain
        .bounds()
        .iter()
        .map(|&(lo, hi)| {
            if per_dim == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                let step = (hi - lo) / (per_dim - 1) as f64;
                (0..per_dim)
                    .map(|i| if i + 1 == per_dim { hi } else { lo + step * i as f64 })
                    .collect()
            }
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Points per axis for a dataset of `size` points; two-dimensional sizes must
/// be perfect squares.
pub fn grid_per_dim(dimension: usize, size: usize) -> Result<usize> {
    if size == 0 {
        return Err(Error::InvalidConfig("dataset size must be positive".into()));
    }
    match dimension {
        1 => Ok(size),
        2 => {
            let root = (size as f64).sqrt().round() as usize;
            if root * root != size {
                return Err(Error::InvalidConfig(format!(
                    "two-dimensional dataset size {size} is not a perfect square"
                )));
            }
            Ok(root)
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Grid dataset of `size` points labelled by the formulation's target.
pub fn grid_dataset(formulation: &ModelFormulation, size: usize) -> Result<Dataset> {
    let per_dim = grid_per_dim(formulation.dimension(), size)?;
    let inputs = sample_grid(formulation.domain(), per_dim)?;
    Dataset::from_target(formulation, inputs)
}

/// A finished attempt together with the trained parameters.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub record: RunRecord,
    pub weights: Vec<f64>,
}

/// Trains one predictor on `dataset` and scores it by its error integral over
/// the formulation domain.
pub fn run_attempt(
    config: &ExperimentConfig,
    dataset: &Dataset,
    size_index: usize,
    restart_index: usize,
) -> Result<Attempt> {
    let f = config.model()?;
    let seed = attempt_seed(config.base_seed, size_index, restart_index);
    let started = Instant::now();
    let target = |x: &[f64]| f.evaluate_target(x).unwrap_or(f64::NAN);

    let (fitness, evals, mut status, weights, r) = match config.method {
        Method::Imann => {
            let spec: NetworkSpec = config.arch.parse()?;
            let d = spec.dimensionality();
            let cma = CmaConfig {
                initial_sigma: config.cma.initial_sigma,
                population: config.cma.population.unwrap_or_else(|| default_population(d)),
                max_evaluations: config.cma.max_evaluations,
                fitness_target: config.cma.fitness_target,
                ..CmaConfig::new(d, seed)
            };
            let objective = objective_for(&spec, &f, dataset)?;
            let result = optimize(objective, &cma)?;
            let status = if result.termination == Termination::Aborted {
                Status::Aborted
            } else {
                Status::Ok
            };
            let r = WeightVector::new(&spec, result.best_vector.clone())
                .and_then(|w| HybridPredictor::new(spec, w, f.clone()))
                .and_then(|p| {
                    error_integral(
                        |x| p.predict(x).unwrap_or(f64::NAN),
                        target,
                        f.domain(),
                        config.quad_points,
                    )
                });
            (
                result.best_fitness,
                result.evaluations_used,
                status,
                result.best_vector,
                r,
            )
        }
        Method::Dnn => {
            let spec: DnnSpec = config.arch.parse()?;
            let trained = train_dnn(&spec, dataset.points(), &config.train_config(seed))?;
            let w = trained.weights;
            let fitness: f64 = dataset
                .points()
                .iter()
                .map(|(x, y)| (dnn_forward(&spec, &w, x).unwrap_or(f64::NAN) - y).powi(2))
                .sum();
            let status = if trained.aborted {
                Status::Aborted
            } else {
                Status::Ok
            };
            let r = error_integral(
                |x| dnn_forward(&spec, &w, x).unwrap_or(f64::NAN),
                target,
                f.domain(),
                config.quad_points,
            );
            let epochs = trained.history.len();
            (fitness, epochs, status, w, r)
        }
    };

    let error_integral = match r {
        Ok(v) => v,
        Err(Error::EvaluationFailure(_)) | Err(Error::NonFinite(_)) => {
            status = Status::Failed;
            f64::INFINITY
        }
        Err(e) => return Err(e),
    };
    let fitness = if fitness.is_finite() {
        fitness
    } else {
        status = Status::Failed;
        f64::INFINITY
    };

    Ok(Attempt {
        record: RunRecord {
            formulation: f.id.to_string(),
            method: config.method,
            arch: config.arch.clone(),
            dataset_size: dataset.len(),
            restart_index,
            seed,
            fitness,
            error_integral,
            evals,
            wall_time_ms: started.elapsed().as_millis() as u64,
            status,
        },
        weights,
    })
}

/// Best record per `(formulation, method, arch, dataset_size)` group, by
/// smallest error integral. Failed attempts only win when every attempt of the
/// group failed; ties go to the lowest restart index.
pub fn select_best(records: &[RunRecord]) -> Vec<RunRecord> {
    let rank = |a: &RunRecord, b: &RunRecord| {
        (a.status == Status::Failed)
            .cmp(&(b.status == Status::Failed))
            .then(a.error_integral.total_cmp(&b.error_integral))
            .then(a.restart_index.cmp(&b.restart_index))
    };
    let mut best: Vec<RunRecord> = Vec::new();
    for r in records {
        let slot = best.iter_mut().find(|b| {
            b.formulation == r.formulation
                && b.method == r.method
                && b.arch == r.arch
                && b.dataset_size == r.dataset_size
        });
        match slot {
            None => best.push(r.clone()),
            Some(b) if rank(r, b).is_lt() => *b = r.clone(),
            Some(_) => {}
        }
    }
    best.sort_by(|a, b| {
        (&a.formulation, a.method, &a.arch, a.dataset_size).cmp(&(
            &b.formulation,
            b.method,
            &b.arch,
            b.dataset_size,
        ))
    });
    best
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Every attempt, ordered by `(dataset_size index, restart_index)`.
    pub attempts: Vec<RunRecord>,
    /// One selected record per dataset size, in size order.
    pub best: Vec<RunRecord>,
}

/// Runs `restarts` attempts for every dataset size and keeps the one with the
/// smallest error integral per size.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let f = config.model()?;
    let datasets = config
        .sizes
        .iter()
        .map(|&n| grid_dataset(&f, n))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|s| (0..config.restarts).map(move |r| (s, r)))
        .collect();
    let mut results: Vec<(usize, RunRecord)> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let record = match run_attempt(config, &datasets[s], s, r) {
                Ok(a) => a.record,
                Err(_) => RunRecord {
                    formulation: f.id.to_string(),
                    method: config.method,
                    arch: config.arch.clone(),
                    dataset_size: datasets[s].len(),
                    restart_index: r,
                    seed: attempt_seed(config.base_seed, s, r),
                    fitness: f64::INFINITY,
                    error_integral: f64::INFINITY,
                    evals: 0,
                    wall_time_ms: 0,
                    status: Status::Failed,
                },
            };
            (s, record)
        })
        .collect();
    results.sort_by_key(|(s, r)| (*s, r.restart_index));

    let best = (0..datasets.len())
        .flat_map(|s| {
            let group: Vec<RunRecord> = results
                .iter()
                .filter(|(i, _)| *i == s)
                .map(|(_, r)| r.clone())
                .collect();
            select_best(&group)
        })
        .collect();
    Ok(ExperimentResult {
        attempts: results.into_iter().map(|(_, r)| r).collect(),
        best,
    })
}
