use std::sync::Arc;

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::ModelBundle;
use crate::belief::StateImage;
use crate::env::{self, SensingAction};
use crate::error::{Error, Result};
use crate::planner::{argmax_first, DecisionContext, Planner};
use crate::rng::{self, SimRng};

/// How the mean of each reverse transition is formed from the trajectory
/// network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverseMeanMode {
    /// The network output is the mean.
    #[default]
    NetworkDirect,
    /// The network output is treated as a clean-trajectory estimate and
    /// plugged into the Gaussian posterior `q(x_{t-1} | x_t, x_0)`.
    DdpmPosterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_diff: usize,
    pub alpha_guide: f64,
    pub lambda_cost: f64,
    pub reverse_mean_mode: ReverseMeanMode,
    /// Chains denoised together in one batched pass.
    pub chunk_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_diff: 1000,
            alpha_guide: 10.0,
            lambda_cost: 0.0,
            reverse_mean_mode: ReverseMeanMode::NetworkDirect,
            chunk_size: 250,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.n_diff == 0
            || self.chunk_size == 0
            || !(self.alpha_guide >= 0.0)
            || !(self.lambda_cost >= 0.0)
        {
            return Err(Error::InvalidConfig(format!("bad sampler config {self:?}")));
        }
        Ok(())
    }
}

/// Action templates prepared for projecting continuous frames.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub actions: Vec<SensingAction>,
    n: usize,
    /// Sorted cell lists so duplicate footprints produce identical scores.
    sorted: Vec<Vec<usize>>,
}

impl TemplateSet {
    pub fn new(actions: &[SensingAction], n: usize) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::EmptyActions);
        }
        let mut sorted = Vec::with_capacity(actions.len());
        for a in actions {
            if let Some(&c) = a.cells.iter().find(|&&c| c >= n) {
                return Err(Error::OutOfBounds { cell: c, n });
            }
            let mut cells = a.cells.clone();
            cells.sort_unstable();
            sorted.push(cells);
        }
        Ok(Self {
            actions: actions.to_vec(),
            n,
            sorted,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Template whose +-1 coded mask has the largest inner product with
    /// `frame`, lowest index on ties.
    pub fn project(&self, frame: &[f64]) -> usize {
        let total: f64 = frame.iter().sum();
        argmax_first(self.sorted.iter().map(|cells| {
            let inside: f64 = cells.iter().map(|&c| frame[c]).sum();
            2.0 * inside - total
        }))
        .expect("nonempty templates")
    }

    /// Projects each of the `tau.len() / n` frames.
    pub fn binarize(&self, tau: &[f64]) -> Vec<usize> {
        tau.chunks(self.n).map(|f| self.project(f)).collect()
    }
}

/// Per-frame projection of a continuous trajectory onto action templates.
pub fn binarize_trajectory(tau0: &[f64], templates: &[SensingAction], n: usize) -> Result<Vec<usize>> {
    if n == 0 || tau0.len() % n != 0 {
        return Err(Error::DimensionMismatch {
            context: "trajectory frames",
            expected: n,
            got: tau0.len(),
        });
    }
    Ok(TemplateSet::new(templates, n)?.binarize(tau0))
}

/// The full batch of sampled trajectories with their scores.
#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    /// Template index of the first action of the best sample.
    pub action: usize,
    pub best_sample: usize,
    /// Binarized template sequence of the best sample.
    pub sequence: Vec<usize>,
    pub returns: Vec<f64>,
    pub distances: Vec<f64>,
    pub scores: Vec<f64>,
    pub first_actions: Vec<usize>,
}

/// Runs `seeds.len()` guided reverse chains; returns the final iterates,
/// one per row.
pub fn reverse_chains(
    bundle: &ModelBundle,
    features: &[f64],
    cfg: &SamplerConfig,
    seeds: &[u64],
) -> Result<Array2<f64>> {
    let layout = bundle.layout();
    let f = layout.frame_len();
    let width = layout.conditioned_len();
    let schedule = &bundle.schedule;
    let b = seeds.len();
    let mut rngs: Vec<SimRng> = seeds.iter().map(|&s| rng::seeded(s)).collect();
    let mut x = Array2::zeros((b, f));
    for (mut row, r) in x.axis_iter_mut(Axis(0)).zip(rngs.iter_mut()) {
        row.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
    }
    let mut input = Array2::zeros((b, width));
    for mut row in input.axis_iter_mut(Axis(0)) {
        row.slice_mut(s![f..f + layout.state_len()])
            .assign(&ndarray::aview1(features));
    }
    let guide = cfg.alpha_guide > 0.0;
    let cost = guide && cfg.lambda_cost > 0.0;
    for t in (1..=schedule.t_diff).rev() {
        let emb = ndarray::Array1::from(layout.embedding(t));
        input.slice_mut(s![.., ..f]).assign(&x);
        for mut row in input.axis_iter_mut(Axis(0)) {
            row.slice_mut(s![f + layout.state_len()..]).assign(&emb);
        }
        let predicted = bundle.trajectory.forward_batch(input.view())?;
        let mut mean = match cfg.reverse_mean_mode {
            ReverseMeanMode::NetworkDirect => predicted,
            ReverseMeanMode::DdpmPosterior => {
                let (c0, ct) = schedule.posterior_coefficients(t);
                predicted * c0 + &x * ct
            }
        };
        let var = schedule.step_variance[t];
        if guide && var > 0.0 {
            let scale = cfg.alpha_guide * var;
            let (_, g_ret) = bundle.returns.input_gradients_batch(input.view())?;
            mean.scaled_add(scale, &g_ret.slice(s![.., ..f]));
            if cost {
                let (_, g_dist) = bundle.distance.input_gradients_batch(x.view())?;
                mean.scaled_add(-scale * cfg.lambda_cost, &g_dist);
            }
        }
        if var > 0.0 {
            let sd = var.sqrt();
            for (mut row, r) in mean.axis_iter_mut(Axis(0)).zip(rngs.iter_mut()) {
                row.iter_mut().for_each(|v| {
                    let z: f64 = r.sample(StandardNormal);
                    *v += sd * z;
                });
            }
        }
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("reverse diffusion step {t}")));
        }
        x = mean;
    }
    Ok(x)
}

/// Samples `n_diff` guided trajectories, projects them onto templates and
/// returns the first action of the sample maximizing predicted return
/// minus `lambda_cost` times its travelled distance from `current_cell`.
pub fn cdas_sample(
    bundle: &ModelBundle,
    state: &StateImage,
    current_cell: usize,
    templates: &TemplateSet,
    cfg: &SamplerConfig,
    rng: &mut SimRng,
) -> Result<SampleOutcome> {
    cfg.validate()?;
    let layout = bundle.layout();
    if state.grid != layout.grid {
        return Err(Error::InvalidConfig(format!(
            "state grid {:?} does not match model grid {:?}",
            state.grid, layout.grid
        )));
    }
    if templates.n != layout.n() {
        return Err(Error::DimensionMismatch {
            context: "template grid",
            expected: layout.n(),
            got: templates.n,
        });
    }
    layout.grid.check_cell(current_cell)?;
    let features = layout.state_features(state)?;
    let call_seed: u64 = rng.random();
    let seeds: Vec<u64> = (0..cfg.n_diff as u64)
        .map(|i| rng::derive_seed(call_seed, i))
        .collect();
    let parts = seeds
        .par_chunks(cfg.chunk_size)
        .map(|chunk| reverse_chains(bundle, &features, cfg, chunk))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let tau0 = ndarray::concatenate(Axis(0), &views).expect("equal widths");

    let f = layout.frame_len();
    let mut input = Array2::zeros((tau0.nrows(), layout.conditioned_len()));
    let emb = layout.embedding(0);
    for (row, tau) in input.axis_iter_mut(Axis(0)).zip(tau0.axis_iter(Axis(0))) {
        layout.fill_row(row, tau.as_slice().expect("contiguous"), &features, &emb);
    }
    debug_assert_eq!(input.ncols(), f + layout.state_len() + emb.len());
    let returns = bundle.returns.forward_batch(input.view())?.column(0).to_vec();

    let sequences: Vec<Vec<usize>> = tau0
        .axis_iter(Axis(0))
        .map(|tau| templates.binarize(tau.as_slice().expect("contiguous")))
        .collect();
    let distances: Vec<f64> = sequences
        .iter()
        .map(|seq| {
            env::path_length(
                layout.grid,
                current_cell,
                seq.iter().map(|&a| templates.actions[a].origin),
            )
        })
        .collect();
    let scores: Vec<f64> = returns
        .iter()
        .zip(&distances)
        .map(|(r, d)| r - cfg.lambda_cost * d)
        .collect();
    let best = argmax_first(scores.iter().copied())
        .ok_or_else(|| Error::NonFinite("sample scores".into()))?;
    let first_actions = sequences.iter().map(|s| s[0]).collect();
    Ok(SampleOutcome {
        action: sequences[best][0],
        best_sample: best,
        sequence: sequences[best].clone(),
        returns,
        distances,
        scores,
        first_actions,
    })
}

/// Cost-blind variant: `cdas_sample` with `lambda_cost = 0`.
pub fn das_sample(
    bundle: &ModelBundle,
    state: &StateImage,
    current_cell: usize,
    templates: &TemplateSet,
    cfg: &SamplerConfig,
    rng: &mut SimRng,
) -> Result<SampleOutcome> {
    let cfg = SamplerConfig {
        lambda_cost: 0.0,
        ..*cfg
    };
    cdas_sample(bundle, state, current_cell, templates, &cfg, rng)
}

/// Receding-horizon planner: sample a batch, execute the first action of
/// the best sequence, replan next step.
#[derive(Debug)]
pub struct DiffusionPlanner {
    bundle: Arc<ModelBundle>,
    pub config: SamplerConfig,
    rng: SimRng,
    templates: Option<TemplateSet>,
    pub last_outcome: Option<SampleOutcome>,
}

impl DiffusionPlanner {
    pub fn new(bundle: Arc<ModelBundle>, config: SamplerConfig, seed: u64) -> Self {
        Self {
            bundle,
            config,
            rng: rng::seeded(seed),
            templates: None,
            last_outcome: None,
        }
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }
}

impl Planner for DiffusionPlanner {
    fn name(&self) -> &str {
        if self.config.lambda_cost > 0.0 {
            "cdas"
        } else {
            "das"
        }
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize> {
        let n = ctx.belief.n();
        let stale = self
            .templates
            .as_ref()
            .is_none_or(|t| t.actions.as_slice() != ctx.actions);
        if stale {
            self.templates = Some(TemplateSet::new(ctx.actions, n)?);
        }
        let templates = self.templates.as_ref().expect("templates cached");
        let outcome = cdas_sample(
            &self.bundle,
            &ctx.belief.state_image(),
            ctx.current_cell,
            templates,
            &self.config,
            &mut self.rng,
        )?;
        let action = outcome.action;
        self.last_outcome = Some(outcome);
        Ok(action)
    }
}
