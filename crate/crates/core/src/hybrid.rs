//! The composed predictor: network subfunctions fed into a model formulation,
//! and the sum-of-squares fitness used to train it.

use crate::benchmarks::ModelFormulation;
use crate::network::{ForwardScratch, NetworkSpec, WeightVector};
use crate::{Error, Result};

/// Fitness assigned to candidates whose prediction is not finite. It ranks
/// after every finite fitness.
pub const WORST_FITNESS: f64 = f64::INFINITY;

/// Labelled training points inside a formulation domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<(Vec<f64>, f64)>,
}

impl Dataset {
    /// Validates that there is at least one point, every input lies in
    /// `formulation`'s domain, and no input repeats.
    pub fn new(formulation: &ModelFormulation, points: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDataset("no points".into()));
        }
        let domain = formulation.domain();
        for (i, (x, y)) in points.iter().enumerate() {
            if !domain.contains(x) {
                return Err(Error::InvalidDataset(format!(
                    "point {i} ({x:?}) outside the {} domain",
                    formulation.id
                )));
            }
            if !y.is_finite() {
                return Err(Error::InvalidDataset(format!("label {i} is not finite")));
            }
            if points[..i].iter().any(|(other, _)| other == x) {
                return Err(Error::InvalidDataset(format!("duplicate input {x:?}")));
            }
        }
        Ok(Self { points })
    }

    /// Labels each input with the formulation's target output.
    pub fn from_target(formulation: &ModelFormulation, inputs: Vec<Vec<f64>>) -> Result<Self> {
        let points = inputs
            .into_iter()
            .map(|x| {
                let y = formulation.evaluate_target(&x)?;
                Ok((x, y))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(formulation, points)
    }

    pub fn points(&self) -> &[(Vec<f64>, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_compatible(spec: &NetworkSpec, formulation: &ModelFormulation) -> Result<()> {
    if spec.n_in != formulation.dimension() {
        return Err(Error::DimensionMismatch {
            what: "network inputs vs formulation dimension",
            expected: formulation.dimension(),
            actual: spec.n_in,
        });
    }
    if spec.n_out != formulation.subfunction_count {
        return Err(Error::DimensionMismatch {
            what: "PM-layer width vs subfunction count",
            expected: formulation.subfunction_count,
            actual: spec.n_out,
        });
    }
    Ok(())
}

/// Sum of squared residuals; non-finite predictions collapse to
/// [`WORST_FITNESS`].
fn sum_squared_residuals(
    spec: &NetworkSpec,
    formulation: &ModelFormulation,
    w: &[f64],
    data: &Dataset,
) -> f64 {
    let mut scratch = ForwardScratch::default();
    let mut s = Vec::with_capacity(spec.n_out);
    let mut total = 0.0;
    for (x, y) in &data.points {
        spec.forward_unchecked(w, x, &mut scratch, &mut s);
        let r = formulation.combine_unchecked(x, &s) - y;
        total += r * r;
    }
    if total.is_finite() {
        total
    } else {
        WORST_FITNESS
    }
}

#[derive(Debug, Clone)]
pub struct HybridPredictor {
    spec: NetworkSpec,
    weights: WeightVector,
    formulation: ModelFormulation,
}

impl HybridPredictor {
    pub fn new(
        spec: NetworkSpec,
        weights: WeightVector,
        formulation: ModelFormulation,
    ) -> Result<Self> {
        check_compatible(&spec, &formulation)?;
        spec.check_weights(&weights)?;
        Ok(Self {
            spec,
            weights,
            formulation,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn formulation(&self) -> &ModelFormulation {
        &self.formulation
    }

    /// Subfunction values the network currently assigns to `x`.
    pub fn subfunctions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.spec.forward(&self.weights, x)
    }

    /// Model output with the network's subfunctions plugged in.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let s = self.subfunctions(x)?;
        let y = self.formulation.combine(x, &s)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("model output"));
        }
        Ok(y)
    }

    /// Sum of squared residuals over `data`.
    pub fn fitness(&self, data: &Dataset) -> f64 {
        sum_squared_residuals(&self.spec, &self.formulation, &self.weights, data)
    }
}

/// Builds the objective handed to the optimizer: a flat weight vector maps to
/// the fitness of the corresponding predictor on `data`. Vectors of the wrong
/// length score [`WORST_FITNESS`].
pub fn objective_for(
    spec: &NetworkSpec,
    formulation: &ModelFormulation,
    data: &Dataset,
) -> Result<impl Fn(&[f64]) -> f64 + Send + Sync + 'static> {
    check_compatible(spec, formulation)?;
    for (x, _) in data.points() {
        if x.len() != spec.n_in {
            return Err(Error::DimensionMismatch {
                what: "dataset input",
                expected: spec.n_in,
                actual: x.len(),
            });
        }
    }
    let spec = spec.clone();
    let formulation = formulation.clone();
    let data = data.clone();
    let d = spec.dimensionality();
    Ok(move |w: &[f64]| {
        if w.len() != d {
            return WORST_FITNESS;
        }
        sum_squared_residuals(&spec, &formulation, w, &data)
    })
}
