//! Policy/value MLP with a shared trunk, softmax head and Glorot-uniform init.

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("layer {layer} expects {expected} inputs but the previous layer produces {got}")]
    Chain {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("softmax input is empty")]
    Empty,
    #[error("non-finite logit at index {0}")]
    NonFinite(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Fully connected layer; `weights` is row-major `outputs × inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| T::lit(rng.random_range(-limit..=limit)))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }

    fn check(&self) -> bool {
        self.weights.len() == self.inputs * self.outputs && self.bias.len() == self.outputs
    }
}

/// Parameters of a shared-trunk network: hidden layers, then a linear policy
/// head (logits) and a linear scalar value head both fed by the last hidden
/// activation (or the raw input when there are no hidden layers).
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<T> {
    pub hidden: Vec<Dense<T>>,
    pub policy_head: Dense<T>,
    pub value_head: Dense<T>,
    pub activation: Activation,
}

impl<T: Scalar> MlpParams<T> {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_sizes: &[usize],
        num_outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut width = input_dim;
        for &h in hidden_sizes {
            hidden.push(Dense::glorot(width, h, rng));
            width = h;
        }
        let policy_head = Dense::glorot(width, num_outputs, rng);
        let value_head = Dense::glorot(width, 1, rng);
        Self {
            hidden,
            policy_head,
            value_head,
            activation,
        }
    }

    pub fn zeros(
        input_dim: usize,
        hidden_sizes: &[usize],
        num_outputs: usize,
        activation: Activation,
    ) -> Self {
        let mut hidden = Vec::new();
        let mut width = input_dim;
        for &h in hidden_sizes {
            hidden.push(Dense::zeros(width, h));
            width = h;
        }
        Self {
            hidden,
            policy_head: Dense::zeros(width, num_outputs),
            value_head: Dense::zeros(width, 1),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .unwrap_or(&self.policy_head)
            .inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.policy_head.outputs
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden.iter().map(|d| d.outputs).collect()
    }

    /// Layers in canonical order: hidden..., policy head, value head.
    pub fn layers(&self) -> impl Iterator<Item = &Dense<T>> {
        self.hidden
            .iter()
            .chain([&self.policy_head, &self.value_head])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense<T>> {
        self.hidden
            .iter_mut()
            .chain([&mut self.policy_head, &mut self.value_head])
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(Dense::num_params).sum()
    }

    /// Checks that every layer's buffers match its declared shape and that
    /// consecutive layers chain.
    pub fn validate(&self) -> Result<(), NnError> {
        let mut width = self.input_dim();
        for (k, layer) in self.layers().enumerate() {
            if !layer.check() {
                return Err(NnError::Shape {
                    expected: layer.inputs * layer.outputs + layer.outputs,
                    got: layer.num_params(),
                });
            }
            if layer.inputs != width {
                return Err(NnError::Chain {
                    layer: k,
                    expected: layer.inputs,
                    got: width,
                });
            }
            if k < self.hidden.len() {
                width = layer.outputs;
            }
        }
        if self.value_head.outputs != 1 {
            return Err(NnError::Shape {
                expected: 1,
                got: self.value_head.outputs,
            });
        }
        Ok(())
    }

    /// All parameters flattened in canonical order (per layer: weights, then bias).
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in self.layers() {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[T]) -> Result<(), NnError> {
        if flat.len() != self.num_params() {
            return Err(NnError::Shape {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut pos = 0;
        for l in self.layers_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
        Ok(())
    }

    /// Places every parameter on `tape` as a leaf, in canonical order.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundMlp {
        let bind = |tape: &mut Tape<T>, d: &Dense<T>| BoundDense {
            inputs: d.inputs,
            outputs: d.outputs,
            weights: tape.vars(&d.weights),
            bias: tape.vars(&d.bias),
        };
        let hidden = self.hidden.iter().map(|d| bind(tape, d)).collect();
        let policy = bind(tape, &self.policy_head);
        let value = bind(tape, &self.value_head);
        BoundMlp {
            hidden,
            policy,
            value,
            activation: self.activation,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundDense {
    inputs: usize,
    outputs: usize,
    weights: Vec<Var>,
    bias: Vec<Var>,
}

impl BoundDense {
    fn apply<T: Scalar>(&self, tape: &mut Tape<T>, x: &[Var]) -> Vec<Var> {
        let pre: Vec<Var> = (0..self.outputs)
            .map(|j| {
                let row = &self.weights[j * self.inputs..(j + 1) * self.inputs];
                tape.dot(row, x)
            })
            .collect();
        pre.iter()
            .zip(&self.bias)
            .map(|(&z, &b)| tape.add(z, b))
            .collect()
    }
}

/// Parameter leaves of an [`MlpParams`] living on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    hidden: Vec<BoundDense>,
    policy: BoundDense,
    value: BoundDense,
    activation: Activation,
}

impl BoundMlp {
    /// Parameter leaves in the same order as [`MlpParams::to_flat`].
    pub fn param_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for d in self
            .hidden
            .iter()
            .chain([&self.policy, &self.value])
        {
            out.extend_from_slice(&d.weights);
            out.extend_from_slice(&d.bias);
        }
        out
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().unwrap_or(&self.policy).inputs
    }
}

/// Differentiable forward pass: returns the logits and the value-head output.
pub fn forward_mlp<T: Scalar>(
    tape: &mut Tape<T>,
    net: &BoundMlp,
    input: &[T],
) -> Result<(Vec<Var>, Var), NnError> {
    if input.len() != net.input_dim() {
        return Err(NnError::Shape {
            expected: net.input_dim(),
            got: input.len(),
        });
    }
    let mut x = tape.vars(input);
    for layer in &net.hidden {
        let z = layer.apply(tape, &x);
        x = z
            .into_iter()
            .map(|v| match net.activation {
                Activation::Tanh => tape.tanh(v),
                Activation::Relu => tape.relu(v),
            })
            .collect();
    }
    let logits = net.policy.apply(tape, &x);
    let value = net.value.apply(tape, &x)[0];
    Ok((logits, value))
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(tape: &mut Tape<T>, logits: &[Var]) -> Result<Vec<Var>, NnError> {
    if logits.is_empty() {
        return Err(NnError::Empty);
    }
    let mut m = T::neg_infinity();
    for (j, &l) in logits.iter().enumerate() {
        let v = tape.value(l);
        if !v.is_finite() {
            return Err(NnError::NonFinite(j));
        }
        m = m.max(v);
    }
    let shifted: Vec<Var> = logits.iter().map(|&l| tape.add_const(l, -m)).collect();
    let exps: Vec<Var> = shifted.iter().map(|&s| tape.exp(s)).collect();
    let total = tape.sum(&exps);
    Ok(exps.iter().map(|&e| tape.div(e, total)).collect())
}

/// Action/class distribution and value estimate for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput<T> {
    pub probs: Vec<T>,
    pub logp: Vec<T>,
    pub value: T,
}

impl<T: Scalar> PolicyOutput<T> {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = j;
            }
        }
        best
    }
}

/// Evaluates the network without keeping the graph around.
///
/// Uses exactly the arithmetic of [`forward_mlp`] followed by [`softmax`], so
/// probabilities are bit-identical to those seen during training.
pub fn evaluate<T: Scalar>(
    params: &MlpParams<T>,
    input: &[T],
    tape: &mut Tape<T>,
) -> Result<PolicyOutput<T>, NnError> {
    tape.clear();
    let net = params.bind(tape);
    let (logits, value) = forward_mlp(tape, &net, input)?;
    let probs = softmax(tape, &logits)?;
    let probs = tape.values(&probs);
    let logp = probs.iter().map(|p| p.ln()).collect();
    Ok(PolicyOutput {
        probs,
        logp,
        value: tape.value(value),
    })
}
