use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::geometry::EuclideanVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer `activation(W x + b)` with `W` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    input_dim: usize,
    output_dim: usize,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        let output_dim = weights.len();
        if output_dim == 0 {
            return Err(Error::invalid("layer needs at least one output"));
        }
        let input_dim = weights[0].len();
        if input_dim == 0 {
            return Err(Error::invalid("layer needs at least one input"));
        }
        if let Some((i, row)) = weights.iter().enumerate().find(|(_, r)| r.len() != input_dim) {
            return Err(Error::invalid(format!("weight row {i} has length {}, expected {input_dim}", row.len())));
        }
        check_dims(output_dim, biases.len())?;
        let weights: Vec<f64> = weights.into_iter().flatten().collect();
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Self { weights, biases, input_dim, output_dim, activation })
    }

    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            weights: vec![0.0; input_dim * output_dim],
            biases: vec![0.0; output_dim],
            input_dim,
            output_dim,
            activation,
        }
    }

    /// Uniform `[−1/√fan_in, 1/√fan_in]` initialization for weights and biases.
    fn random(input_dim: usize, output_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (input_dim as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let weights = draw(input_dim * output_dim);
        let biases = draw(output_dim);
        Self { weights, biases, input_dim, output_dim, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Flat row-major weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.input_dim).map(<[f64]>::to_vec).collect()
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.input_dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Parameter gradients, laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradient { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.biases.iter_mut().zip(&b.biases).for_each(|(x, y)| *x += y);
        }
    }

    /// Parameter blocks in the order used by [`Model::parameter_blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()]).collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }
}

/// Euclidean network `F(x; θ)`: a stack of dense layers whose last layer is
/// linear, so the output feeds `exp0` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<Layer>,
}

/// Layer inputs and pre-activations recorded during a forward pass.
pub(crate) struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    pub(crate) fn output(&self) -> &[f64] {
        &self.output
    }
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let last = layers.last().ok_or_else(|| Error::invalid("model needs at least one layer"))?;
        if last.activation != Activation::Identity {
            return Err(Error::invalid("the last layer must use the identity activation"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_dim,
                    i + 1,
                    pair[1].input_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Seeded random network: ReLU hidden layers of the given widths, then a
    /// linear output layer. An empty `hidden` gives a single linear layer.
    pub fn mlp(input_dim: usize, hidden: &[usize], output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(output_dim);
        let n = widths.len() - 1;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n { Activation::Identity } else { Activation::Relu };
                Layer::random(w[0], w[1], act, &mut rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn linear(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        Self::mlp(input_dim, &[], output_dim, seed)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Mutable parameter blocks: `W₀, b₀, W₁, b₁, …`.
    pub fn parameter_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()]).collect()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<EuclideanVector> {
        let trace = self.trace(x)?;
        EuclideanVector::new(trace.output)
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Result<Trace> {
        check_dims(self.input_dim(), x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let a = layer.pre_activation(&current);
            let next: Vec<f64> = a.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(current);
            pre.push(a);
            current = next;
        }
        Ok(Trace { inputs, pre, output: current })
    }

    /// Parameter gradients of a scalar whose gradient with respect to the
    /// network output is `upstream`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        let trace = self.trace(x)?;
        self.backward_from_trace(&trace, upstream)
    }

    pub(crate) fn backward_from_trace(&self, trace: &Trace, upstream: &[f64]) -> Result<Gradients> {
        check_dims(self.output_dim(), upstream.len())?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let local: Vec<f64> =
                delta.iter().zip(&trace.pre[i]).map(|(d, &a)| d * layer.activation.derivative(a)).collect();
            let input = &trace.inputs[i];
            let mut weights = Vec::with_capacity(layer.weights.len());
            for &l in &local {
                weights.extend(input.iter().map(|v| l * v));
            }
            if i > 0 {
                let mut below = vec![0.0; layer.input_dim];
                for (row, &l) in layer.weights.chunks(layer.input_dim).zip(&local) {
                    for (b, w) in below.iter_mut().zip(row) {
                        *b += w * l;
                    }
                }
                delta = below;
            }
            grads.push(LayerGradient { weights, biases: local });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}
