//! Black-box baseline: a dense network with a linear scalar output, trained by
//! full-batch Adam on the mean squared error.
//!
//! Parameters use the same flat layout as [`crate::network`] without the PM
//! coupling weights: for each layer, its weight matrix (one row per
//! destination neuron) followed by its biases.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{parse_widths, Activation};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnnSpec {
    /// Layer widths from input to the single output neuron.
    widths: Vec<usize>,
    pub hidden_activation: Activation,
}

impl DnnSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 || widths.contains(&0) {
            return Err(Error::InvalidArchitecture(format!("{widths:?}")));
        }
        if widths.last() != Some(&1) {
            return Err(Error::InvalidArchitecture(format!(
                "{widths:?}: dense baseline must end in a single output"
            )));
        }
        Ok(Self {
            widths,
            hidden_activation: Activation::Tanh,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.hidden_activation = activation;
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_in(&self) -> usize {
        self.widths[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    fn check(&self, w: &[f64], x: &[f64]) -> Result<()> {
        if w.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                what: "dense weight vector",
                expected: self.parameter_count(),
                actual: w.len(),
            });
        }
        if x.len() != self.n_in() {
            return Err(Error::DimensionMismatch {
                what: "dense network input",
                expected: self.n_in(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Runs the network, keeping every layer's output in `acts`
    /// (`acts[0]` is the input, the last entry is the scalar output).
    fn forward_cached(&self, w: &[f64], x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        let layers = self.widths.len() - 1;
        acts.resize_with(layers + 1, Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let mut offset = 0;
        for l in 0..layers {
            let (n_src, n_dst) = (self.widths[l], self.widths[l + 1]);
            let weights = &w[offset..offset + n_src * n_dst];
            let biases = &w[offset + n_src * n_dst..offset + n_src * n_dst + n_dst];
            offset += n_src * n_dst + n_dst;
            let (done, rest) = acts.split_at_mut(l + 1);
            let input = &done[l];
            let out = &mut rest[0];
            out.clear();
            out.extend(weights.chunks_exact(n_src).zip(biases).map(|(row, &b)| {
                row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + b
            }));
            if l + 1 < layers {
                for v in out.iter_mut() {
                    *v = self.hidden_activation.apply(*v);
                }
            }
        }
        acts[layers][0]
    }
}

impl FromStr for DnnSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_widths(s)?)
    }
}

impl fmt::Display for DnnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        f.pad(&parts.join("-"))
    }
}

pub fn dnn_forward(spec: &DnnSpec, w: &[f64], x: &[f64]) -> Result<f64> {
    spec.check(w, x)?;
    let mut acts = Vec::new();
    Ok(spec.forward_cached(w, x, &mut acts))
}

/// Mean squared error `(1/n) Σ (ŷ - y)²`.
pub fn dnn_loss(spec: &DnnSpec, w: &[f64], data: &[(Vec<f64>, f64)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("no points".into()));
    }
    let mut acts = Vec::new();
    let mut total = 0.0;
    for (x, y) in data {
        spec.check(w, x)?;
        let r = spec.forward_cached(w, x, &mut acts) - y;
        total += r * r;
    }
    Ok(total / data.len() as f64)
}

/// Loss and its exact gradient by reverse-mode accumulation.
pub fn dnn_loss_and_gradient(
    spec: &DnnSpec,
    w: &[f64],
    data: &[(Vec<f64>, f64)],
) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("no points".into()));
    }
    let n = data.len() as f64;
    let layers = spec.widths.len() - 1;
    let mut offsets = Vec::with_capacity(layers);
    let mut offset = 0;
    for p in spec.widths.windows(2) {
        offsets.push(offset);
        offset += p[0] * p[1] + p[1];
    }

    let mut grad = vec![0.0; w.len()];
    let mut acts = Vec::new();
    let mut delta: Vec<f64> = Vec::new();
    let mut next_delta: Vec<f64> = Vec::new();
    let mut loss = 0.0;
    for (x, y) in data {
        spec.check(w, x)?;
        let out = spec.forward_cached(w, x, &mut acts);
        let r = out - y;
        loss += r * r;

        delta.clear();
        delta.push(2.0 * r / n);
        for l in (0..layers).rev() {
            let (n_src, n_dst) = (spec.widths[l], spec.widths[l + 1]);
            let base = offsets[l];
            let input = &acts[l];
            for (j, &d) in delta.iter().enumerate() {
                let row = &mut grad[base + j * n_src..base + (j + 1) * n_src];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[base + n_src * n_dst + j] += d;
            }
            if l == 0 {
                break;
            }
            next_delta.clear();
            next_delta.extend((0..n_src).map(|i| {
                let back: f64 = delta
                    .iter()
                    .enumerate()
                    .map(|(j, d)| w[base + j * n_src + i] * d)
                    .sum();
                back * spec.hidden_activation.derivative_from_output(input[i])
            }));
            std::mem::swap(&mut delta, &mut next_delta);
        }
    }
    Ok((loss / n, grad))
}

/// Gradient of the mean squared error with respect to every parameter.
pub fn dnn_gradient(spec: &DnnSpec, w: &[f64], data: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    dnn_loss_and_gradient(spec, w, data).map(|(_, g)| g)
}

/// Uniform `±1/√fan_in` initialization for weights and biases alike.
pub fn init_weights(spec: &DnnSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Vec::with_capacity(spec.parameter_count());
    for p in spec.widths.windows(2) {
        let bound = 1.0 / (p[0] as f64).sqrt();
        for _ in 0..p[0] * p[1] + p[1] {
            w.push(rng.random_range(-bound..bound));
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a loss improvement of at least 1e-12 before stopping.
    pub plateau_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 20_000,
            plateau_patience: 1_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 || self.plateau_patience == 0 {
            return Err(Error::InvalidConfig(
                "max_epochs and plateau_patience must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Lowest-loss weights seen during training.
    pub weights: Vec<f64>,
    pub loss: f64,
    /// Loss before each update step.
    pub history: Vec<f64>,
    /// Training stopped on a non-finite loss.
    pub aborted: bool,
}

impl TrainResult {
    pub fn epochs(&self) -> usize {
        self.history.len()
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const MIN_IMPROVEMENT: f64 = 1e-12;

/// Full-batch Adam from a seeded uniform initialization.
pub fn train_dnn(
    spec: &DnnSpec,
    data: &[(Vec<f64>, f64)],
    config: &TrainConfig,
) -> Result<TrainResult> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidDataset("no points".into()));
    }
    let mut w = init_weights(spec, config.seed);
    let mut m = vec![0.0; w.len()];
    let mut v = vec![0.0; w.len()];
    let mut best_w = w.clone();
    let mut best_loss = f64::INFINITY;
    let mut history = Vec::new();
    let mut stale = 0;
    let mut aborted = false;

    for epoch in 1..=config.max_epochs {
        let (loss, grad) = dnn_loss_and_gradient(spec, &w, data)?;
        history.push(loss);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            aborted = true;
            break;
        }
        if loss < best_loss - MIN_IMPROVEMENT {
            stale = 0;
        } else {
            stale += 1;
        }
        if loss < best_loss {
            best_loss = loss;
            best_w.clone_from(&w);
        }
        if stale >= config.plateau_patience {
            break;
        }

        let t = epoch as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for i in 0..w.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            w[i] -= config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
        }
    }

    if !aborted {
        let last = dnn_loss(spec, &w, data)?;
        if last < best_loss {
            best_loss = last;
            best_w = w;
        }
    }
    Ok(TrainResult {
        weights: best_w,
        loss: best_loss,
        history,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data(n: usize) -> Vec<(Vec<f64>, f64)> {
        (0..n)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                (vec![x], 2.0 * x)
            })
            .collect()
    }

    #[test]
    fn parameter_counts() {
        let s: DnnSpec = "1-32-16-16-1".parse().unwrap();
        assert_eq!(s.parameter_count(), 64 + 528 + 272 + 17);
        let s: DnnSpec = "2-32-32-16-1".parse().unwrap();
        assert_eq!(s.parameter_count(), 96 + 1056 + 528 + 17);
        assert!("1-5-5-2".parse::<DnnSpec>().is_err());
        assert!("1-1".parse::<DnnSpec>().is_err());
    }

    #[test]
    fn zero_weights_give_zero() {
        let s: DnnSpec = "2-5-5-1".parse().unwrap();
        let w = vec![0.0; s.parameter_count()];
        assert_eq!(dnn_forward(&s, &w, &[3.0, -1.0]).unwrap(), 0.0);
    }

    #[test]
    fn one_hidden_unit_is_odd_at_origin() {
        // w_in, b_h, w_out, b_out
        let s: DnnSpec = "1-1-1".parse().unwrap();
        let w = [0.7, 0.0, 1.0, 0.0];
        assert_eq!(dnn_forward(&s, &w, &[0.0]).unwrap(), 0.0);
        let x = 0.4f64;
        assert_eq!(dnn_forward(&s, &w, &[x]).unwrap(), (0.7 * x).tanh());
        assert_eq!(
            dnn_forward(&s, &w, &[-x]).unwrap(),
            -dnn_forward(&s, &w, &[x]).unwrap()
        );
    }

    #[test]
    fn forward_is_deterministic_and_checks_dimensions() {
        let s: DnnSpec = "2-4-3-1".parse().unwrap();
        let w = init_weights(&s, 3);
        let a = dnn_forward(&s, &w, &[0.1, 0.2]).unwrap();
        assert_eq!(a.to_bits(), dnn_forward(&s, &w, &[0.1, 0.2]).unwrap().to_bits());
        assert!(dnn_forward(&s, &w, &[0.1]).is_err());
        assert!(dnn_forward(&s, &w[1..], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn gradient_vanishes_at_perfect_fit() {
        // y = 1.5 tanh(0.5 x) - 0.2 is reproduced exactly by a 1-1-1 net
        let s: DnnSpec = "1-1-1".parse().unwrap();
        let w = [0.5, 0.0, 1.5, -0.2];
        let data: Vec<_> = [-1.0, 0.0, 0.5, 2.0]
            .iter()
            .map(|&x: &f64| (vec![x], 1.5 * (0.5 * x).tanh() - 0.2))
            .collect();
        let g = dnn_gradient(&s, &w, &data).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15), "{g:?}");
    }

    #[test]
    fn duplicated_data_leaves_gradient_unchanged() {
        let s: DnnSpec = "1-4-3-1".parse().unwrap();
        let w = init_weights(&s, 1);
        let data = line_data(5);
        let doubled: Vec<_> = data.iter().chain(&data).cloned().collect();
        let g1 = dnn_gradient(&s, &w, &data).unwrap();
        let g2 = dnn_gradient(&s, &w, &doubled).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn empty_data_rejected() {
        let s: DnnSpec = "1-4-1".parse().unwrap();
        let w = init_weights(&s, 0);
        assert!(dnn_gradient(&s, &w, &[]).is_err());
        assert!(train_dnn(&s, &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let s: DnnSpec = "4-16-1".parse().unwrap();
        let w = init_weights(&s, 9);
        assert!(w[..80].iter().all(|v| v.abs() < 0.5));
        assert!(w[80..].iter().all(|v| v.abs() < 0.25));
        assert_eq!(w, init_weights(&s, 9));
    }

    #[test]
    fn fits_a_line() {
        let s: DnnSpec = "1-8-1".parse().unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            max_epochs: 5000,
            seed: 4,
            ..TrainConfig::default()
        };
        let r = train_dnn(&s, &line_data(9), &cfg).unwrap();
        assert!(!r.aborted);
        assert!(r.loss < 1e-4, "{}", r.loss);
        assert!(r.loss <= r.history[0]);
        assert!(r.epochs() <= 5000);
        let decreasing = r.history.windows(2).filter(|p| p[1] <= p[0]).count();
        assert!(
            decreasing as f64 >= 0.95 * (r.history.len() - 1) as f64,
            "{decreasing} of {}",
            r.history.len() - 1
        );
    }

    #[test]
    fn training_is_deterministic() {
        let s: DnnSpec = "1-6-1".parse().unwrap();
        let cfg = TrainConfig {
            max_epochs: 300,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train_dnn(&s, &line_data(7), &cfg).unwrap();
        let b = train_dnn(&s, &line_data(7), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn plateau_stops_early() {
        // steps far too small to move the loss by the improvement threshold
        let s: DnnSpec = "1-2-1".parse().unwrap();
        let data = vec![(vec![0.0], 0.0)];
        let cfg = TrainConfig {
            learning_rate: 1e-16,
            plateau_patience: 5,
            max_epochs: 1000,
            seed: 0,
        };
        let r = train_dnn(&s, &data, &cfg).unwrap();
        assert!(r.epochs() < 1000, "{}", r.epochs());
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
