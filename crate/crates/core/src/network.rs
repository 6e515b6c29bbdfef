//! The subfunction network: fully connected hidden layers, a linear PM
//! ("part of the model") layer with one neuron per subfunction, and one scalar
//! coupling weight per PM neuron that scales its output before it enters the
//! model.
//!
//! # Flat weight layout
//!
//! All parameters live in one flat vector, layer by layer from the input side.
//! Each layer stores its weight matrix row-major with the destination neuron
//! as the row (`w[dst * n_src + src]`), followed by its biases. After the PM
//! layer's weights come its `n_out` biases and then the `n_out` coupling
//! weights, so the last `2 * n_out` entries are `(PM biases, PM scales)`.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a = apply(z)`.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        })
    }
}

/// Parses `"n_in-h1-...-hm-n_out"` into its widths. At least one hidden
/// layer is required and every width must be positive.
pub fn parse_widths(arch: &str) -> Result<Vec<usize>> {
    let widths = arch
        .trim()
        .split('-')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::InvalidArchitecture(arch.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    if widths.len() < 3 {
        return Err(Error::InvalidArchitecture(format!(
            "{arch}: need input, at least one hidden layer and output"
        )));
    }
    Ok(widths)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub n_in: usize,
    pub hidden: Vec<usize>,
    /// PM-layer width, equal to the number of subfunctions.
    pub n_out: usize,
    pub hidden_activation: Activation,
}

impl NetworkSpec {
    pub fn new(n_in: usize, hidden: Vec<usize>, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidArchitecture(format!(
                "{n_in}-{hidden:?}-{n_out}"
            )));
        }
        Ok(Self {
            n_in,
            hidden,
            n_out,
            hidden_activation: Activation::Tanh,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.hidden_activation = activation;
        self
    }

    /// Widths of every layer from input to PM layer.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.n_in);
        w.extend_from_slice(&self.hidden);
        w.push(self.n_out);
        w
    }

    /// Number of trainable parameters: every connection weight, every hidden
    /// and PM bias, and one coupling weight per PM neuron.
    pub fn dimensionality(&self) -> usize {
        let widths = self.widths();
        let connections: usize = widths.windows(2).map(|p| p[0] * p[1]).sum();
        let hidden_biases: usize = self.hidden.iter().sum();
        connections + hidden_biases + 2 * self.n_out
    }

    pub fn layout(&self) -> Layout {
        let widths = self.widths();
        let last = widths.len() - 2;
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |kind, len| {
            segments.push(Segment { kind, offset, len });
            offset += len;
        };
        for (layer, p) in widths.windows(2).enumerate() {
            push(SegmentKind::Weights { layer }, p[0] * p[1]);
            push(SegmentKind::Biases { layer }, p[1]);
            if layer == last {
                push(SegmentKind::PmScales, p[1]);
            }
        }
        Layout { segments }
    }

    /// Splits a flat vector into per-layer matrices, biases and PM scales.
    pub fn unpack(&self, w: &[f64]) -> Result<NetworkWeights> {
        self.check_weights(w)?;
        let widths = self.widths();
        let mut rest = w;
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for p in widths.windows(2) {
            let (inputs, outputs) = (p[0], p[1]);
            let (weights, tail) = rest.split_at(inputs * outputs);
            let (biases, tail) = tail.split_at(outputs);
            layers.push(DenseLayer {
                inputs,
                outputs,
                weights: weights.to_vec(),
                biases: biases.to_vec(),
            });
            rest = tail;
        }
        Ok(NetworkWeights {
            layers,
            scales: rest.to_vec(),
        })
    }

    pub fn check_weights(&self, w: &[f64]) -> Result<()> {
        let d = self.dimensionality();
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                what: "weight vector",
                expected: d,
                actual: w.len(),
            });
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.n_in,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Subfunction values `s_j = v_j * (W_pm h + b_pm)_j` at input `x`.
    pub fn forward(&self, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_weights(w)?;
        self.check_input(x)?;
        let mut out = Vec::with_capacity(self.n_out);
        let mut scratch = ForwardScratch::default();
        self.forward_unchecked(w, x, &mut scratch, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output"));
        }
        Ok(out)
    }

    /// Forward pass without length checks. `out` is overwritten.
    pub(crate) fn forward_unchecked(
        &self,
        w: &[f64],
        x: &[f64],
        scratch: &mut ForwardScratch,
        out: &mut Vec<f64>,
    ) {
        let ForwardScratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(x);
        let mut offset = 0;
        let mut n_src = self.n_in;
        for &n_dst in &self.hidden {
            dense(w, &mut offset, a, n_src, n_dst, b);
            for v in b.iter_mut() {
                *v = self.hidden_activation.apply(*v);
            }
            std::mem::swap(a, b);
            n_src = n_dst;
        }
        dense(w, &mut offset, a, n_src, self.n_out, out);
        for (s, v) in out.iter_mut().zip(&w[offset..offset + self.n_out]) {
            *s *= v;
        }
    }

    pub fn arch_string(&self) -> String {
        self.widths()
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let w = parse_widths(s)?;
        Self::new(w[0], w[1..w.len() - 1].to_vec(), w[w.len() - 1])
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.arch_string())
    }
}

/// `out = W * input + b`, reading `W` then `b` from `w` at `offset`.
#[inline]
fn dense(
    w: &[f64],
    offset: &mut usize,
    input: &[f64],
    n_src: usize,
    n_dst: usize,
    out: &mut Vec<f64>,
) {
    let weights = &w[*offset..*offset + n_src * n_dst];
    let biases = &w[*offset + n_src * n_dst..*offset + n_src * n_dst + n_dst];
    out.clear();
    out.extend(weights.chunks_exact(n_src).zip(biases).map(|(row, &bias)| {
        row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + bias
    }));
    *offset += n_src * n_dst + n_dst;
}

#[derive(Debug, Default)]
pub(crate) struct ForwardScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Flat parameter vector validated against a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        spec.check_weights(&values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self(vec![0.0; spec.dimensionality()])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, one row per destination neuron.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn weight(&self, dst: usize, src: usize) -> f64 {
        self.weights[dst * self.inputs + src]
    }
}

/// Structured view of a flat weight vector. The last entry of `layers` is the
/// PM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub layers: Vec<DenseLayer>,
    pub scales: Vec<f64>,
}

impl NetworkWeights {
    pub fn pm_layer(&self) -> &DenseLayer {
        self.layers.last().expect("at least one layer")
    }

    /// Inverse of [`NetworkSpec::unpack`].
    pub fn pack(&self) -> Vec<f64> {
        let mut w = Vec::new();
        for layer in &self.layers {
            w.extend_from_slice(&layer.weights);
            w.extend_from_slice(&layer.biases);
        }
        w.extend_from_slice(&self.scales);
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Connection weights into layer `layer` (0 = first hidden layer).
    Weights { layer: usize },
    Biases { layer: usize },
    /// PM-to-model coupling weights.
    PmScales,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub segments: Vec<Segment>,
}

impl Layout {
    pub fn total_len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len)
    }

    pub fn find(&self, kind: SegmentKind) -> Option<Segment> {
        self.segments.iter().copied().find(|s| s.kind == kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(arch: &str) -> NetworkSpec {
        arch.parse().unwrap()
    }

    #[test]
    fn dimensionality_examples() {
        assert_eq!(spec("1-5-5-1").dimensionality(), 47);
        assert_eq!(spec("2-5-5-2").dimensionality(), 59);
        assert_eq!(spec("1-5-5-2").dimensionality(), 54);
    }

    #[test]
    fn parse_architectures() {
        let s = spec("2-32-32-16-1");
        assert_eq!(s.n_in, 2);
        assert_eq!(s.hidden, vec![32, 32, 16]);
        assert_eq!(s.n_out, 1);
        assert_eq!(s.to_string(), "2-32-32-16-1");
        for bad in ["", "1-1", "1-0-1", "a-5-1", "1--1", "1-5-"] {
            assert!(bad.parse::<NetworkSpec>().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn layout_tail_holds_pm_bias_then_scale() {
        let s = spec("1-5-5-1");
        let layout = s.layout();
        assert_eq!(layout.total_len(), 47);
        let bias = layout.find(SegmentKind::Biases { layer: 2 }).unwrap();
        let scale = layout.find(SegmentKind::PmScales).unwrap();
        assert_eq!(bias.range(), 45..46);
        assert_eq!(scale.range(), 46..47);
        // contiguous, no gaps
        for p in layout.segments.windows(2) {
            assert_eq!(p[0].offset + p[0].len, p[1].offset);
        }
    }

    #[test]
    fn unpack_rejects_wrong_length() {
        let s = spec("1-5-5-1");
        assert!(matches!(
            s.unpack(&vec![0.0; 46]),
            Err(Error::DimensionMismatch { expected: 47, actual: 46, .. })
        ));
        assert!(WeightVector::new(&s, vec![0.0; 48]).is_err());
        assert!(WeightVector::new(&s, vec![f64::NAN; 47]).is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let s = spec("2-5-5-2");
        let w = WeightVector::zeros(&s);
        assert_eq!(s.forward(&w, &[0.7, -1.2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_output_from_pm_bias_and_scale() {
        let s = spec("1-5-5-1");
        let mut w = vec![0.0; 47];
        w[45] = 1.0; // PM bias
        w[46] = 3.0; // PM scale
        for x in [-4.0, 0.0, 2.5] {
            assert_eq!(s.forward(&w, &[x]).unwrap(), vec![3.0]);
        }
    }

    #[test]
    fn hand_evaluated_forward_pass() {
        // 1-1-1: h = tanh(0.5 x + 0.1); s = 2 * (-1.5 h + 0.3)
        let s = spec("1-1-1");
        let w = [0.5, 0.1, -1.5, 0.3, 2.0];
        let x = 0.8f64;
        let h = (0.5 * x + 0.1).tanh();
        let expected = 2.0 * (-1.5 * h + 0.3);
        assert_eq!(s.forward(&w, &[x]).unwrap(), vec![expected]);
    }

    #[test]
    fn forward_rejects_mismatches() {
        let s = spec("1-5-5-1");
        assert!(s.forward(&[0.0; 47], &[1.0, 2.0]).is_err());
        assert!(s.forward(&[0.0; 40], &[1.0]).is_err());
    }

    #[test]
    fn forward_signals_overflow() {
        let s = spec("1-1-1");
        let w = [0.0, 0.0, 0.0, 1e300, 1e300];
        assert!(matches!(s.forward(&w, &[0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn forward_is_deterministic() {
        let s = spec("2-5-5-2");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Vec<f64> = (0..59).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = s.forward(&w, &[0.3, 1.1]).unwrap();
        let b = s.forward(&w, &[0.3, 1.1]).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn pack_unpack_roundtrip_many() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = spec("2-4-3-2");
        for _ in 0..1000 {
            let w: Vec<f64> = (0..s.dimensionality())
                .map(|_| rng.random_range(-10.0..10.0))
                .collect();
            assert_eq!(s.unpack(&w).unwrap().pack(), w);
        }
    }

    #[test]
    fn unpack_places_entries_by_destination_row() {
        let s = spec("2-3-1");
        let w: Vec<f64> = (0..s.dimensionality()).map(|i| i as f64).collect();
        let nw = s.unpack(&w).unwrap();
        assert_eq!(nw.layers[0].weight(1, 0), 2.0);
        assert_eq!(nw.layers[0].weight(2, 1), 5.0);
        assert_eq!(nw.layers[0].biases, vec![6.0, 7.0, 8.0]);
        assert_eq!(nw.pm_layer().weights, vec![9.0, 10.0, 11.0]);
        assert_eq!(nw.pm_layer().biases, vec![12.0]);
        assert_eq!(nw.scales, vec![13.0]);
    }

    fn arb_spec_and_weights() -> impl Strategy<Value = (NetworkSpec, Vec<f64>, Vec<f64>)> {
        (1usize..=3, proptest::collection::vec(1usize..=6, 1..=3), 1usize..=3)
            .prop_flat_map(|(n_in, hidden, n_out)| {
                let s = NetworkSpec::new(n_in, hidden, n_out).unwrap();
                let d = s.dimensionality();
                (
                    Just(s),
                    proptest::collection::vec(-3.0f64..3.0, d),
                    proptest::collection::vec(-4.0f64..4.0, n_in),
                )
            })
    }

    proptest! {
        #[test]
        fn doubling_scale_doubles_output((s, w, x) in arb_spec_and_weights()) {
            let out = s.forward(&w, &x).unwrap();
            let scales = s.layout().find(SegmentKind::PmScales).unwrap();
            let mut w2 = w.clone();
            for v in &mut w2[scales.range()] {
                *v *= 2.0;
            }
            let out2 = s.forward(&w2, &x).unwrap();
            for (a, b) in out.iter().zip(&out2) {
                prop_assert_eq!(2.0 * a, *b);
            }
        }

        #[test]
        fn output_bounded_by_pm_weights((s, w, x) in arb_spec_and_weights()) {
            let out = s.forward(&w, &x).unwrap();
            let nw = s.unpack(&w).unwrap();
            let pm = nw.pm_layer();
            for (j, o) in out.iter().enumerate() {
                let row_l1: f64 = (0..pm.inputs).map(|i| pm.weight(j, i).abs()).sum();
                let bound = nw.scales[j].abs() * (row_l1 + pm.biases[j].abs());
                prop_assert!(o.abs() <= bound * (1.0 + 1e-12), "{} > {}", o, bound);
            }
        }

        #[test]
        fn pack_inverts_unpack((s, w, _x) in arb_spec_and_weights()) {
            prop_assert_eq!(s.unpack(&w).unwrap().pack(), w);
        }
    }
}
