use ndarray::Zip;

use super::network::{Gradients, Network};

/// Adaptive-moment optimizer state, shaped like the network it trains.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Gradients,
    second: Gradients,
}

impl AdamState {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        Self {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(net: &mut Network, state: &mut AdamState, grads: &Gradients) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let step_size = state.learning_rate * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
    for (l, layer) in net.layers.iter_mut().enumerate() {
        Zip::from(&mut layer.weight)
            .and(&mut state.first.weights[l])
            .and(&mut state.second.weights[l])
            .and(&grads.weights[l])
            .for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= step_size * *m / (v.sqrt() + eps);
            });
        Zip::from(&mut layer.bias)
            .and(&mut state.first.biases[l])
            .and(&mut state.second.biases[l])
            .and(&grads.biases[l])
            .for_each(|b, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *b -= step_size * *m / (v.sqrt() + eps);
            });
    }
}
