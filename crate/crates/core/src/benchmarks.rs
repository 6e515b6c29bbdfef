//! Benchmark target systems and the model formulations built on them.
//!
//! Each formulation rewrites a target as a model with `k` open subfunction
//! slots. Feeding the ideal subfunction values back into the combiner
//! reproduces the target exactly.

use crate::quadrature::Domain;
use crate::{Error, Result};

/// Polynomial target `(x^5 - 16x^3 + 5x^2) / 2`.
pub fn eval_poly_target(x: f64) -> f64 {
    let x2 = x * x;
    let x3 = x2 * x;
    (x3 * x2 - 16.0 * x3 + 5.0 * x2) / 2.0
}

/// Modified Rosenbrock function `Σ (x_{i+1} - x_i^2)^4 + (1 - x_i)^4`.
pub fn eval_rosenbrock_target(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::DimensionMismatch {
            what: "rosenbrock input (at least)",
            expected: 2,
            actual: x.len(),
        });
    }
    Ok(x.windows(2)
        .map(|p| (p[1] - p[0] * p[0]).powi(4) + (1.0 - p[0]).powi(4))
        .sum())
}

fn poly_target(x: &[f64]) -> f64 {
    eval_poly_target(x[0])
}

fn rosenbrock_2d(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (b - a * a).powi(4) + (1.0 - a).powi(4)
}

/// A system whose measurable output the predictors are trained to reproduce.
#[derive(Debug, Clone)]
pub struct TargetSystem {
    pub id: &'static str,
    pub domain: Domain,
    evaluate: fn(&[f64]) -> f64,
}

impl TargetSystem {
    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Target output at `x`. Panics if `x` has the wrong length.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dimension(), "target input dimension");
        (self.evaluate)(x)
    }
}

/// A mathematical model with `subfunction_count` slots filled by a predictor.
#[derive(Debug, Clone)]
pub struct ModelFormulation {
    pub id: &'static str,
    pub target: TargetSystem,
    pub subfunction_count: usize,
    combine: fn(&[f64], &[f64]) -> f64,
    ideal: fn(&[f64]) -> Vec<f64>,
}

impl ModelFormulation {
    pub fn dimension(&self) -> usize {
        self.target.dimension()
    }

    pub fn domain(&self) -> &Domain {
        &self.target.domain
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                what: "formulation input",
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Model output at `x` with subfunction values `s`.
    pub fn combine(&self, x: &[f64], s: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        if s.len() != self.subfunction_count {
            return Err(Error::DimensionMismatch {
                what: "subfunction values",
                expected: self.subfunction_count,
                actual: s.len(),
            });
        }
        Ok((self.combine)(x, s))
    }

    /// Unchecked combiner for hot loops; lengths must already be validated.
    #[inline]
    pub(crate) fn combine_unchecked(&self, x: &[f64], s: &[f64]) -> f64 {
        (self.combine)(x, s)
    }

    /// Subfunction values that make the model reproduce the target exactly.
    pub fn ideal_subfunctions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok((self.ideal)(x))
    }

    pub fn evaluate_target(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok((self.target.evaluate)(x))
    }
}

fn poly_system() -> TargetSystem {
    TargetSystem {
        id: "polynomial",
        domain: Domain::interval(-4.0, 4.0).expect("valid interval"),
        evaluate: poly_target,
    }
}

fn rosenbrock_system() -> TargetSystem {
    TargetSystem {
        id: "rosenbrock",
        domain: Domain::new(vec![(-1.4, 1.6), (-0.25, 3.75)]).expect("valid box"),
        evaluate: rosenbrock_2d,
    }
}

fn one_slot(
    id: &'static str,
    combine: fn(&[f64], &[f64]) -> f64,
    ideal: fn(&[f64]) -> Vec<f64>,
) -> ModelFormulation {
    ModelFormulation {
        id,
        target: poly_system(),
        subfunction_count: 1,
        combine,
        ideal,
    }
}

fn two_slot(
    id: &'static str,
    combine: fn(&[f64], &[f64]) -> f64,
    ideal: fn(&[f64]) -> Vec<f64>,
) -> ModelFormulation {
    ModelFormulation {
        id,
        target: poly_system(),
        subfunction_count: 2,
        combine,
        ideal,
    }
}

/// All nine formulations, `f1` through `f9`, in order.
pub fn registry() -> Vec<ModelFormulation> {
    vec![
        one_slot(
            "f1",
            |x, s| {
                let x = x[0];
                (s[0] * x.powi(5) - 16.0 * x.powi(3) + 5.0 * x * x) / 2.0
            },
            |_| vec![1.0],
        ),
        one_slot(
            "f2",
            |x, s| {
                let x = x[0];
                (s[0] * x.powi(4) - 16.0 * x.powi(3) + 5.0 * x * x) / 2.0
            },
            |x| vec![x[0]],
        ),
        one_slot(
            "f3",
            |x, s| {
                let x = x[0];
                (s[0] * x.powi(3) - 16.0 * x.powi(3) + 5.0 * x * x) / 2.0
            },
            |x| vec![x[0] * x[0]],
        ),
        one_slot(
            "f4",
            |x, s| {
                let x = x[0];
                (s[0] - 16.0 * x.powi(3) + 5.0 * x * x) / 2.0
            },
            |x| vec![x[0].powi(5)],
        ),
        two_slot(
            "f5",
            |x, s| {
                let x = x[0];
                (s[0] * x.powi(5) + s[1] * x.powi(3) + 5.0 * x * x) / 2.0
            },
            |_| vec![1.0, -16.0],
        ),
        two_slot(
            "f6",
            |x, s| {
                let x = x[0];
                (s[0] * x.powi(4) + s[1] * x * x + 5.0 * x * x) / 2.0
            },
            |x| vec![x[0], -16.0 * x[0]],
        ),
        two_slot(
            "f7",
            |x, s| {
                let x = x[0];
                (s[0] * x.powi(3) + s[1] * x + 5.0 * x * x) / 2.0
            },
            |x| vec![x[0] * x[0], -16.0 * x[0] * x[0]],
        ),
        two_slot(
            "f8",
            |x, s| (s[0] + s[1] + 5.0 * x[0] * x[0]) / 2.0,
            |x| vec![x[0].powi(5), -16.0 * x[0].powi(3)],
        ),
        ModelFormulation {
            id: "f9",
            target: rosenbrock_system(),
            subfunction_count: 2,
            combine: |_, s| s[0].powi(4) + s[1].powi(4),
            ideal: |x| vec![x[1] - x[0] * x[0], 1.0 - x[0]],
        },
    ]
}

/// Looks up a formulation by id (`"f1"`..`"f9"`).
pub fn formulation(id: &str) -> Result<ModelFormulation> {
    registry()
        .into_iter()
        .find(|f| f.id == id)
        .ok_or_else(|| Error::UnknownFormulation(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(domain: &Domain, rng: &mut ChaCha8Rng) -> Vec<f64> {
        domain
            .bounds()
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..=hi))
            .collect()
    }

    #[test]
    fn polynomial_values() {
        assert_eq!(eval_poly_target(0.0), 0.0);
        assert_eq!(eval_poly_target(1.0), -5.0);
        assert_eq!(eval_poly_target(2.0), -38.0);
    }

    #[test]
    fn rosenbrock_values() {
        assert_eq!(eval_rosenbrock_target(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(eval_rosenbrock_target(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(eval_rosenbrock_target(&[2.0, 1.0]).unwrap(), 82.0);
        assert_eq!(eval_rosenbrock_target(&[1.0; 7]).unwrap(), 0.0);
        assert!(eval_rosenbrock_target(&[1.0]).is_err());
    }

    #[test]
    fn combine_examples() {
        let f = registry();
        assert_eq!(f[3].combine(&[1.0], &[5.0]).unwrap(), -3.0);
        assert_eq!(f[8].combine(&[0.3, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(f[0].combine(&[2.0], &[1.0]).unwrap(), -38.0);
        assert_eq!(f[7].combine(&[1.0], &[1.0, -16.0]).unwrap(), -5.0);
    }

    #[test]
    fn combine_rejects_wrong_lengths() {
        let f = registry();
        assert!(f[0].combine(&[1.0], &[1.0, 2.0]).is_err());
        assert!(f[0].combine(&[1.0, 2.0], &[1.0]).is_err());
        assert!(f[8].combine(&[1.0], &[1.0, 2.0]).is_err());
        assert!(f[8].ideal_subfunctions(&[1.0]).is_err());
    }

    #[test]
    fn ideal_subfunction_examples() {
        let f = registry();
        assert_eq!(f[2].ideal_subfunctions(&[2.0]).unwrap(), vec![4.0]);
        assert_eq!(f[8].ideal_subfunctions(&[2.0, 1.0]).unwrap(), vec![-3.0, -1.0]);
        assert_eq!(f[0].ideal_subfunctions(&[-3.7]).unwrap(), vec![1.0]);
        assert_eq!(
            f[7].ideal_subfunctions(&[2.0]).unwrap(),
            vec![32.0, -128.0]
        );
    }

    #[test]
    fn registry_layout() {
        let f = registry();
        assert_eq!(f.len(), 9);
        for (i, m) in f.iter().enumerate() {
            assert_eq!(m.id, format!("f{}", i + 1));
            let k = if i < 4 { 1 } else { 2 };
            assert_eq!(m.subfunction_count, k);
        }
        for m in &f[..8] {
            assert_eq!(m.domain().bounds(), &[(-4.0, 4.0)]);
        }
        assert_eq!(f[8].domain().bounds(), &[(-1.4, 1.6), (-0.25, 3.75)]);
        assert_eq!(formulation("f9").unwrap().id, "f9");
        assert!(matches!(formulation("f10"), Err(Error::UnknownFormulation(_))));
    }

    #[test]
    fn ideal_subfunctions_reproduce_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in registry() {
            for _ in 0..1000 {
                let x = sample(m.domain(), &mut rng);
                let s = m.ideal_subfunctions(&x).unwrap();
                let y = m.combine(&x, &s).unwrap();
                let t = m.evaluate_target(&x).unwrap();
                assert!(
                    (y - t).abs() <= 1e-12 * t.abs().max(1.0),
                    "{} at {x:?}: {y} vs {t}",
                    m.id
                );
            }
        }
    }

    #[test]
    fn polynomial_formulations_share_the_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in &registry()[..8] {
            for _ in 0..100 {
                let x = sample(m.domain(), &mut rng);
                assert_eq!(m.evaluate_target(&x).unwrap(), eval_poly_target(x[0]));
            }
        }
    }

    #[test]
    fn rosenbrock_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(2..6);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(eval_rosenbrock_target(&x).unwrap() >= 0.0);
        }
    }
}
