use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// `x * sigmoid(x)`: ReLU-shaped but smooth, so input gradients used for
    /// guidance are continuous.
    Silu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Silu => "silu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "silu" => Some(Activation::Silu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Silu => z * sigmoid(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = sigmoid(z);
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fully connected layer `a = act(x W + b)` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Dense>,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weight.raw_dim()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Activations recorded during a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of each layer, then the network output.
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.inputs.last().expect("tape has an output")
    }
}

impl Network {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut SimRng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "bad layer spec: dims {dims:?}, {} activations",
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weight =
                    Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-bound..bound));
                let bias = Array1::from_shape_fn(w[1], |_| rng.random_range(-bound..bound));
                Dense {
                    weight,
                    bias,
                    activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// `hidden` layers of the given widths with `hidden_act`, then an
    /// identity output layer.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        rng: &mut SimRng,
    ) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let mut acts = vec![hidden_act; hidden.len()];
        acts.push(Activation::Identity);
        Self::new(&dims, &acts, rng)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weight.ncols()).unwrap_or(0)
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.weight.ncols()));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width == self.input_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                got: width,
            })
        }
    }

    /// Batched forward pass; each row is one sample.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        let mut x = input.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weight);
            z += &layer.bias;
            let act = layer.activation;
            if act != Activation::Identity {
                z.mapv_inplace(|v| act.apply(v));
            }
            x = z;
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_tape(&self, input: ArrayView2<'_, f64>) -> Result<Tape> {
        self.check_input(input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        inputs.push(input.to_owned());
        for layer in &self.layers {
            let x = inputs.last().expect("layer input");
            let mut z = x.dot(&layer.weight);
            z += &layer.bias;
            let act = layer.activation;
            let a = z.mapv(|v| act.apply(v));
            pre_activations.push(z);
            inputs.push(a);
        }
        Ok(Tape {
            inputs,
            pre_activations,
        })
    }

    /// Reverse pass from `grad_output` (d loss / d output, one row per
    /// sample). Returns parameter gradients summed over the batch when
    /// `want_params` is set, and the gradient with respect to the input.
    pub fn backward(
        &self,
        tape: &Tape,
        grad_output: ArrayView2<'_, f64>,
        want_params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        let out = tape.output();
        if grad_output.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                context: "output gradient",
                expected: out.len(),
                got: grad_output.len(),
            });
        }
        let mut grads = want_params.then(|| Gradients::zeros_like(self));
        let mut delta = grad_output.to_owned();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            if act != Activation::Identity {
                Zip::from(&mut delta)
                    .and(&tape.pre_activations[l])
                    .for_each(|d, &z| *d *= act.derivative(z));
            }
            if let Some(g) = grads.as_mut() {
                g.weights[l] = tape.inputs[l].t().dot(&delta);
                g.biases[l] = delta.sum_axis(Axis(0));
            }
            delta = delta.dot(&layer.weight.t());
        }
        Ok((grads, delta))
    }

    /// Input gradients of a scalar-output network for a batch of inputs,
    /// together with the outputs.
    pub fn input_gradients_batch(
        &self,
        input: ArrayView2<'_, f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        if self.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "scalar network output",
                expected: 1,
                got: self.output_dim(),
            });
        }
        let tape = self.forward_tape(input)?;
        let ones = Array2::ones((input.nrows(), 1));
        let (_, grad) = self.backward(&tape, ones.view(), false)?;
        Ok((tape.output().column(0).to_owned(), grad))
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: self.parameter_count(),
                got: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }
}

/// Gradients of `loss` with respect to all parameters for one sample, given
/// d loss / d output.
pub fn param_gradients(net: &Network, input: &[f64], loss_grad: &[f64]) -> Result<Gradients> {
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
    let tape = net.forward_tape(x)?;
    let g = ArrayView2::from_shape((1, loss_grad.len()), loss_grad).expect("row view");
    let (grads, _) = net.backward(&tape, g, true)?;
    Ok(grads.expect("requested parameter gradients"))
}

/// Gradient of a scalar network output with respect to its input.
pub fn input_gradients(net: &Network, input: &[f64]) -> Result<Vec<f64>> {
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
    let (_, g) = net.input_gradients_batch(x)?;
    Ok(g.into_raw_vec_and_offset().0)
}
