//! Covariance Matrix Adaptation Evolution Strategy with an explicit ask/tell
//! interface.
//!
//! The update follows the standard (μ/μ_w, λ) strategy: log-decreasing
//! recombination weights over the best `μ = ⌊λ/2⌋` candidates, cumulative
//! step-size adaptation through the conjugate evolution path `p_σ`, and a
//! combined rank-one + rank-μ covariance update with the usual default
//! learning rates. Selection only looks at the ordering of the fitness values,
//! ties broken by submission index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Initial step size used when none is configured. Larger steps start the
/// network weights far from zero and tend to give rougher subfunctions.
pub const DEFAULT_INITIAL_SIGMA: f64 = 0.1;

/// `4 + ⌊3 ln D⌋`.
pub fn default_population(dimension: usize) -> usize {
    4 + (3.0 * (dimension as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaConfig {
    pub dimension: usize,
    pub initial_mean: Vec<f64>,
    pub initial_sigma: f64,
    pub population: usize,
    pub max_evaluations: usize,
    /// Optimization stops once the best fitness is at or below this value.
    pub fitness_target: f64,
    pub seed: u64,
    /// Generations between eigendecompositions of the covariance.
    pub eigen_interval: usize,
    /// Largest tolerated covariance condition number.
    pub condition_cap: f64,
}

impl CmaConfig {
    /// Defaults: zero mean, σ = [`DEFAULT_INITIAL_SIGMA`], default population, 100 000 evaluations,
    /// target 1e-12, eigendecomposition every ⌈D/10⌉ generations, condition
    /// cap 1e14.
    pub fn new(dimension: usize, seed: u64) -> Self {
        Self {
            dimension,
            initial_mean: vec![0.0; dimension],
            initial_sigma: DEFAULT_INITIAL_SIGMA,
            population: default_population(dimension.max(1)),
            max_evaluations: 100_000,
            fitness_target: 1e-12,
            seed,
            eigen_interval: dimension.div_ceil(10).max(1),
            condition_cap: 1e14,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dimension == 0 {
            return bad("CMA-ES dimension must be positive".into());
        }
        if self.initial_mean.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                what: "initial mean",
                expected: self.dimension,
                actual: self.initial_mean.len(),
            });
        }
        if !(self.initial_sigma > 0.0 && self.initial_sigma.is_finite()) {
            return bad(format!("initial sigma {} must be positive", self.initial_sigma));
        }
        if self.population < 2 {
            return bad(format!("population {} must be at least 2", self.population));
        }
        if self.max_evaluations < self.population {
            return bad(format!(
                "budget {} smaller than one generation ({})",
                self.max_evaluations, self.population
            ));
        }
        if self.eigen_interval == 0 {
            return bad("eigen interval must be positive".into());
        }
        if !(self.condition_cap > 1.0) {
            return bad(format!("condition cap {} must exceed 1", self.condition_cap));
        }
        Ok(())
    }
}

/// Strategy constants derived from dimension and population size.
#[derive(Debug, Clone)]
struct Parameters {
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Parameters {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Self {
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

#[derive(Debug, Clone)]
struct Pending {
    candidates: Vec<Vec<f64>>,
    /// `(x - m) / σ` for each candidate.
    steps: Vec<DVector<f64>>,
}

/// Mutable optimizer state. `ask` and `tell` must alternate.
#[derive(Debug, Clone)]
pub struct CmaState {
    params: Parameters,
    mean: DVector<f64>,
    sigma: f64,
    covariance: DMatrix<f64>,
    /// Eigenvectors of the covariance, as columns.
    basis: DMatrix<f64>,
    /// Square roots of the covariance eigenvalues.
    scales: DVector<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: usize,
    evaluations: usize,
    last_decomposition: usize,
    eigen_interval: usize,
    condition_cap: f64,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
}

impl CmaState {
    pub fn new(config: &CmaConfig) -> Result<Self> {
        config.validate()?;
        let n = config.dimension;
        Ok(Self {
            params: Parameters::new(n, config.population),
            mean: DVector::from_column_slice(&config.initial_mean),
            sigma: config.initial_sigma,
            covariance: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
            evaluations: 0,
            last_decomposition: 0,
            eigen_interval: config.eigen_interval,
            condition_cap: config.condition_cap,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            pending: None,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn population(&self) -> usize {
        self.params.lambda
    }

    pub fn parents(&self) -> usize {
        self.params.weights.len()
    }

    /// Normalized recombination weights of the `μ` parents.
    pub fn recombination_weights(&self) -> &[f64] {
        &self.params.weights
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn decompose(&mut self) -> Result<()> {
        let n = self.dimension();
        // keep C exactly symmetric before decomposing
        let sym = (&self.covariance + self.covariance.transpose()) * 0.5;
        if sym.iter().any(|v| !v.is_finite()) {
            return Err(Error::CovarianceFailure("non-finite covariance entry".into()));
        }
        let eig = SymmetricEigen::new(sym.clone());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in eig.eigenvalues.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo > 0.0) {
            return Err(Error::CovarianceFailure(format!(
                "smallest eigenvalue {lo:e} is not positive"
            )));
        }
        if hi / lo > self.condition_cap {
            return Err(Error::CovarianceFailure(format!(
                "condition number {:e} exceeds cap {:e}",
                hi / lo,
                self.condition_cap
            )));
        }
        self.covariance = sym;
        self.basis = eig.eigenvectors;
        self.scales = DVector::from_iterator(n, eig.eigenvalues.iter().map(|v| v.sqrt()));
        self.last_decomposition = self.generation;
        Ok(())
    }

    /// Samples `λ` candidates from `N(m, σ² C)`.
    pub fn ask(&mut self) -> Result<Vec<Vec<f64>>> {
        if self.pending.is_some() {
            return Err(Error::Protocol("ask called again before tell"));
        }
        if self.generation > 0 && self.generation - self.last_decomposition >= self.eigen_interval
        {
            self.decompose()?;
        }
        let n = self.dimension();
        let mut candidates = Vec::with_capacity(self.params.lambda);
        let mut steps = Vec::with_capacity(self.params.lambda);
        for _ in 0..self.params.lambda {
            let z = DVector::from_iterator(
                n,
                (0..n).map(|_| StandardNormal.sample(&mut self.rng)),
            );
            let y = &self.basis * z.component_mul(&self.scales);
            let x = &self.mean + &y * self.sigma;
            candidates.push(x.as_slice().to_vec());
            steps.push(y);
        }
        self.pending = Some(Pending {
            candidates: candidates.clone(),
            steps,
        });
        Ok(candidates)
    }

    /// Updates the distribution from the fitnesses of the last `ask`, in
    /// candidate order. NaN fitnesses are treated as `+∞`.
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitnesses: &[f64]) -> Result<()> {
        let pending = self
            .pending
            .as_ref()
            .ok_or(Error::Protocol("tell without a matching ask"))?;
        let lambda = self.params.lambda;
        if candidates.len() != lambda {
            return Err(Error::DimensionMismatch {
                what: "candidates",
                expected: lambda,
                actual: candidates.len(),
            });
        }
        if fitnesses.len() != lambda {
            return Err(Error::DimensionMismatch {
                what: "fitnesses",
                expected: lambda,
                actual: fitnesses.len(),
            });
        }
        if pending.candidates.as_slice() != candidates {
            return Err(Error::Protocol("candidates differ from the last ask"));
        }
        let pending = self.pending.take().expect("checked above");

        let key = |f: f64| if f.is_nan() { f64::INFINITY } else { f };
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| key(fitnesses[a]).total_cmp(&key(fitnesses[b])));

        let n = self.dimension();
        let p = &self.params;
        let mut y_w = DVector::zeros(n);
        for (w, &i) in p.weights.iter().zip(&order) {
            y_w.axpy(*w, &pending.steps[i], 1.0);
        }

        self.mean.axpy(self.sigma, &y_w, 1.0);

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &self.basis * (self.basis.tr_mul(&y_w)).component_div(&self.scales);
        self.path_sigma *= 1.0 - p.c_sigma;
        self.path_sigma
            .axpy((p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt(), &inv_sqrt_y, 1.0);

        let ps_norm = self.path_sigma.norm();
        let decay = 1.0 - (1.0 - p.c_sigma).powi(2 * (self.generation as i32 + 1));
        let h_sigma = ps_norm / decay.sqrt() / p.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);

        self.path_c *= 1.0 - p.c_c;
        if h_sigma {
            self.path_c
                .axpy((p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt(), &y_w, 1.0);
        }

        let delta_h = if h_sigma { 0.0 } else { p.c_c * (2.0 - p.c_c) };
        let old_weight = 1.0 - p.c_1 - p.c_mu + p.c_1 * delta_h;
        self.covariance *= old_weight;
        self.covariance
            .ger(p.c_1, &self.path_c, &self.path_c, 1.0);
        for (w, &i) in p.weights.iter().zip(&order) {
            let y = &pending.steps[i];
            self.covariance.ger(p.c_mu * w, y, y, 1.0);
        }

        self.sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();

        self.generation += 1;
        self.evaluations += lambda;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    BudgetExhausted,
    /// The covariance could not be decomposed or became too ill-conditioned.
    Aborted,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_vector: Vec<f64>,
    pub best_fitness: f64,
    pub evaluations_used: usize,
    /// Best fitness seen so far after each generation.
    pub history: Vec<(usize, f64)>,
    pub termination: Termination,
    /// Reason for an [`Termination::Aborted`] run.
    pub abort_reason: Option<String>,
}

impl OptimizationResult {
    pub fn aborted(&self) -> bool {
        self.termination == Termination::Aborted
    }
}

/// Minimizes `objective` until the fitness target is met or no further full
/// generation fits in the evaluation budget.
pub fn optimize<F>(mut objective: F, config: &CmaConfig) -> Result<OptimizationResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut state = CmaState::new(config)?;
    let lambda = state.population();
    let mut best_vector = config.initial_mean.clone();
    let mut best_fitness = f64::INFINITY;
    let mut history = Vec::new();
    let mut termination = Termination::BudgetExhausted;
    let mut abort_reason = None;

    while state.evaluations() + lambda <= config.max_evaluations {
        let candidates = match state.ask() {
            Ok(c) => c,
            Err(e @ Error::CovarianceFailure(_)) => {
                termination = Termination::Aborted;
                abort_reason = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let fitnesses: Vec<f64> = candidates.iter().map(|c| objective(c)).collect();
        for (c, &f) in candidates.iter().zip(&fitnesses) {
            if f < best_fitness {
                best_fitness = f;
                best_vector.clone_from(c);
            }
        }
        state.tell(&candidates, &fitnesses)?;
        history.push((state.generation(), best_fitness));
        if best_fitness <= config.fitness_target {
            termination = Termination::TargetReached;
            break;
        }
    }

    Ok(OptimizationResult {
        best_vector,
        best_fitness,
        evaluations_used: state.evaluations(),
        history,
        termination,
        abort_reason,
    })
}
