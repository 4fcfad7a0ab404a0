use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::ModelLayout;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Network};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            activation: Activation::Silu,
            learning_rate: 1e-3,
            batch_size: 64,
        }
    }
}

impl NetConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad network config {self:?}")));
        }
        Ok(())
    }
}

/// One chunk of an episode, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// Raw state image at the chunk start (mean then variance).
    pub state: Vec<f64>,
    /// `H` frames of +-1 coded action masks, frame-major.
    pub tau: Vec<f64>,
    /// Discounted return of the chunk.
    pub ret: f64,
    /// Cumulative Euclidean distance of the chunk's origins, starting from
    /// the agent cell before the chunk.
    pub distance: f64,
}

/// Per-epoch mean squared error (summed over outputs, averaged over
/// samples).
pub type LossCurve = Vec<f64>;

fn check_samples(samples: &[TrainingSample], layout: &ModelLayout) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    for s in samples {
        if s.tau.len() != layout.frame_len() {
            return Err(Error::DimensionMismatch {
                context: "training trajectory",
                expected: layout.frame_len(),
                got: s.tau.len(),
            });
        }
        if s.state.len() != layout.state_len() {
            return Err(Error::DimensionMismatch {
                context: "training state",
                expected: layout.state_len(),
                got: s.state.len(),
            });
        }
    }
    Ok(())
}

fn features(samples: &[TrainingSample], layout: &ModelLayout) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| layout.features_from_raw(&s.state))
        .collect()
}

fn new_net(
    input: usize,
    output: usize,
    cfg: &NetConfig,
    target_mean: &[f64],
    rng: &mut SimRng,
) -> Result<Network> {
    cfg.validate()?;
    let mut net = Network::mlp(input, &cfg.hidden, output, cfg.activation, rng)?;
    let last = net.layers.last_mut().expect("output layer");
    last.bias.iter_mut().zip(target_mean).for_each(|(b, m)| *b = *m);
    Ok(net)
}

/// Minibatch Adam on squared error. `batch` builds `(inputs, targets)` for
/// a list of sample indices.
fn fit<F>(
    net: &mut Network,
    count: usize,
    cfg: &NetConfig,
    epochs: usize,
    rng: &mut SimRng,
    mut batch: F,
) -> Result<LossCurve>
where
    F: FnMut(&[usize], &mut SimRng) -> (Array2<f64>, Array2<f64>),
{
    let mut state = AdamState::new(net, cfg.learning_rate);
    let mut order: Vec<usize> = (0..count).collect();
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let (x, y) = batch(idx, rng);
            let tape = net.forward_tape(x.view())?;
            let mut diff = tape.output() - &y;
            total += diff.iter().map(|d| d * d).sum::<f64>();
            diff *= 2.0 / idx.len() as f64;
            let (grads, _) = net.backward(&tape, diff.view(), true)?;
            adam_step(net, &mut state, &grads.expect("parameter gradients"));
        }
        let loss = total / count as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        curve.push(loss);
    }
    Ok(curve)
}

fn noisy_conditioned_batch(
    idx: &[usize],
    samples: &[TrainingSample],
    feats: &[Vec<f64>],
    layout: &ModelLayout,
    schedule: &NoiseSchedule,
    noising: bool,
    rng: &mut SimRng,
) -> Array2<f64> {
    let f = layout.frame_len();
    let mut x = Array2::zeros((idx.len(), layout.conditioned_len()));
    let mut noisy = vec![0.0; f];
    for (mut row, &i) in x.axis_iter_mut(Axis(0)).zip(idx) {
        let t = if noising {
            rng.random_range(1..=schedule.t_diff)
        } else {
            0
        };
        let (a, b) = schedule.coefficients(t);
        for (v, &c) in noisy.iter_mut().zip(&samples[i].tau) {
            let e: f64 = if t > 0 { rng.sample(StandardNormal) } else { 0.0 };
            *v = a * c + b * e;
        }
        layout.fill_row(row.view_mut(), &noisy, &feats[i], &layout.embedding(t));
    }
    x
}

fn mean_rows(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Vec<f64> {
    let mut sum = vec![0.0; width];
    let mut count = 0usize;
    for r in rows {
        sum.iter_mut().zip(&r).for_each(|(s, v)| *s += v);
        count += 1;
    }
    sum.iter().map(|s| s / count.max(1) as f64).collect()
}

/// Clean-trajectory regressor: `t ~ U{1..T}`, input the noised trajectory
/// with the conditioning state and step embedding, target the clean
/// trajectory.
pub fn train_trajectory_model(
    samples: &[TrainingSample],
    layout: &ModelLayout,
    schedule: &NoiseSchedule,
    cfg: &NetConfig,
    epochs: usize,
    rng: &mut SimRng,
) -> Result<(Network, LossCurve)> {
    check_samples(samples, layout)?;
    let feats = features(samples, layout)?;
    let f = layout.frame_len();
    let target_mean = mean_rows(samples.iter().map(|s| s.tau.clone()), f);
    let mut net = new_net(layout.conditioned_len(), f, cfg, &target_mean, rng)?;
    let curve = fit(&mut net, samples.len(), cfg, epochs, rng, |idx, rng| {
        let x = noisy_conditioned_batch(idx, samples, &feats, layout, schedule, true, rng);
        let mut y = Array2::zeros((idx.len(), f));
        for (mut row, &i) in y.axis_iter_mut(Axis(0)).zip(idx) {
            row.as_slice_mut().unwrap().copy_from_slice(&samples[i].tau);
        }
        (x, y)
    })?;
    Ok((net, curve))
}

/// Mean trajectory loss of `net` over one noised pass of `samples`.
pub fn trajectory_loss(
    net: &Network,
    samples: &[TrainingSample],
    layout: &ModelLayout,
    schedule: &NoiseSchedule,
    rng: &mut SimRng,
) -> Result<f64> {
    check_samples(samples, layout)?;
    let feats = features(samples, layout)?;
    let idx: Vec<usize> = (0..samples.len()).collect();
    let x = noisy_conditioned_batch(&idx, samples, &feats, layout, schedule, true, rng);
    let out = net.forward_batch(x.view())?;
    let mut total = 0.0;
    for (row, s) in out.axis_iter(Axis(0)).zip(samples) {
        total += row.iter().zip(&s.tau).map(|(o, t)| (o - t).powi(2)).sum::<f64>();
    }
    Ok(total / samples.len() as f64)
}

/// Return regressor. Without noising every input is the clean trajectory
/// at step 0.
pub fn train_return_model(
    samples: &[TrainingSample],
    layout: &ModelLayout,
    schedule: &NoiseSchedule,
    noising: bool,
    cfg: &NetConfig,
    epochs: usize,
    rng: &mut SimRng,
) -> Result<(Network, LossCurve)> {
    check_samples(samples, layout)?;
    let feats = features(samples, layout)?;
    let target_mean = mean_rows(samples.iter().map(|s| vec![s.ret]), 1);
    let mut net = new_net(layout.conditioned_len(), 1, cfg, &target_mean, rng)?;
    let curve = fit(&mut net, samples.len(), cfg, epochs, rng, |idx, rng| {
        let x = noisy_conditioned_batch(idx, samples, &feats, layout, schedule, noising, rng);
        let y = Array2::from_shape_fn((idx.len(), 1), |(r, _)| samples[idx[r]].ret);
        (x, y)
    })?;
    Ok((net, curve))
}

/// Distance regressor on the clean trajectory alone.
pub fn train_distance_model(
    samples: &[TrainingSample],
    layout: &ModelLayout,
    cfg: &NetConfig,
    epochs: usize,
    rng: &mut SimRng,
) -> Result<(Network, LossCurve)> {
    check_samples(samples, layout)?;
    let f = layout.frame_len();
    let target_mean = mean_rows(samples.iter().map(|s| vec![s.distance]), 1);
    let mut net = new_net(f, 1, cfg, &target_mean, rng)?;
    let curve = fit(&mut net, samples.len(), cfg, epochs, rng, |idx, _| {
        let mut x = Array2::zeros((idx.len(), f));
        for (mut row, &i) in x.axis_iter_mut(Axis(0)).zip(idx) {
            row.as_slice_mut().unwrap().copy_from_slice(&samples[i].tau);
        }
        let y = Array2::from_shape_fn((idx.len(), 1), |(r, _)| samples[idx[r]].distance);
        (x, y)
    })?;
    Ok((net, curve))
}

/// Scalar predictions of a return network on clean trajectories at step 0.
pub fn predict_returns(
    net: &Network,
    samples: &[TrainingSample],
    layout: &ModelLayout,
) -> Result<Vec<f64>> {
    check_samples(samples, layout)?;
    let emb = layout.embedding(0);
    let mut x = Array2::zeros((samples.len(), layout.conditioned_len()));
    for (row, s) in x.axis_iter_mut(Axis(0)).zip(samples) {
        layout.fill_row(row, &s.tau, &layout.features_from_raw(&s.state)?, &emb);
    }
    Ok(net.forward_batch(x.view())?.column(0).to_vec())
}
