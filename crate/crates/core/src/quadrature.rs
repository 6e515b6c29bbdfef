//! Gauss-Legendre quadrature and the error integral used as the accuracy
//! indicator of a trained predictor.

use crate::{Error, Result};

/// Largest rule size accepted by [`gauss_legendre_rule`].
pub const MAX_RULE_SIZE: usize = 256;

/// Default number of quadrature points per dimension for [`error_integral`].
pub const DEFAULT_POINTS_PER_DIM: usize = 80;

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::UnsupportedDimension(0));
        }
        for &(lo, hi) in &bounds {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidInterval { lo, hi });
            }
        }
        Ok(Self { bounds })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    /// Product of the interval lengths.
    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x
                .iter()
                .zip(&self.bounds)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }
}

/// Nodes and positive weights of a one-dimensional quadrature rule, nodes in
/// increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Evaluates the Legendre polynomial `P_n` and its derivative at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let k = k as f64;
        let p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = p_next;
    }
    let n = n as f64;
    let dp = n * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// The `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Roots are found by Newton iteration from the cosine initial guess and
/// mirrored, so the rule is exactly symmetric about zero.
pub fn gauss_legendre_rule(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_RULE_SIZE {
        return Err(Error::UnsupportedRuleSize(n));
    }
    if n == 1 {
        return Ok(QuadratureRule {
            nodes: vec![0.0],
            weights: vec![2.0],
        });
    }

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..half {
        // i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // refresh the derivative at the converged root
        if x != 0.0 {
            dp = legendre_with_derivative(n, x).1;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let mid = n / 2;
        nodes[mid] = 0.0;
        let (_, dp) = legendre_with_derivative(n, 0.0);
        weights[mid] = 2.0 / (dp * dp);
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Affinely maps a rule on `[-1, 1]` onto `[lo, hi]`.
pub fn map_rule(rule: &QuadratureRule, lo: f64, hi: f64) -> Result<QuadratureRule> {
    if !(lo < hi) {
        return Err(Error::InvalidInterval { lo, hi });
    }
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(QuadratureRule {
        nodes: rule.nodes.iter().map(|&t| mid + half * t).collect(),
        weights: rule.weights.iter().map(|&w| half * w).collect(),
    })
}

/// Integrates `f` over a one- or two-dimensional `domain` with a tensor-product
/// Gauss-Legendre rule of `points_per_dim` points per axis.
///
/// A non-finite integrand value aborts with [`Error::EvaluationFailure`].
pub fn integrate<F>(mut f: F, domain: &Domain, points_per_dim: usize) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = domain.dimension();
    if dim > 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let base = gauss_legendre_rule(points_per_dim)?;
    let rules = domain
        .bounds()
        .iter()
        .map(|&(lo, hi)| map_rule(&base, lo, hi))
        .collect::<Result<Vec<_>>>()?;

    let mut total = 0.0;
    let mut point = vec![0.0; dim];
    let mut eval = |point: &[f64], w: f64| -> Result<f64> {
        let v = f(point);
        if !v.is_finite() {
            return Err(Error::EvaluationFailure(point.to_vec()));
        }
        Ok(w * v)
    };
    match dim {
        1 => {
            for (&x, &w) in rules[0].nodes.iter().zip(&rules[0].weights) {
                point[0] = x;
                total += eval(&point, w)?;
            }
        }
        _ => {
            for (&x, &wx) in rules[0].nodes.iter().zip(&rules[0].weights) {
                let mut row = 0.0;
                for (&y, &wy) in rules[1].nodes.iter().zip(&rules[1].weights) {
                    point[0] = x;
                    point[1] = y;
                    row += eval(&point, wy)?;
                }
                total += wx * row;
            }
        }
    }
    Ok(total)
}

/// The error integral `R = ∫_Ω |predict(x) - target(x)| dx`.
///
/// This is the absolute error (the square root of the squared residual), not
/// the squared error.
pub fn error_integral<P, T>(
    mut predict: P,
    mut target: T,
    domain: &Domain,
    points_per_dim: usize,
) -> Result<f64>
where
    P: FnMut(&[f64]) -> f64,
    T: FnMut(&[f64]) -> f64,
{
    integrate(
        |x| {
            let (p, t) = (predict(x), target(x));
            if p.is_finite() && t.is_finite() {
                (p - t).abs()
            } else {
                f64::NAN
            }
        },
        domain,
        points_per_dim,
    )
}
