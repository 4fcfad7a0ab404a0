//! Offline training data: information-greedy episodes labelled with
//! one-step recovery rewards, chunked into fixed-length lookahead windows.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, RecoveryConfig};
use crate::diffusion::{ModelLayout, TrainingSample};
use crate::env::{self, Environment, FovPreset, Grid, SensingAction};
use crate::error::{Error, Result};
use crate::myopic::eig_select;
use crate::rng::{self, stream};

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "cdas-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_len: usize,
    pub n_wid: usize,
    pub k: usize,
    pub sigma: f64,
    pub fov: FovPreset,
    pub m_episodes: usize,
    pub t_steps: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub n_beta: usize,
    pub n_y: usize,
    pub recovery: RecoveryConfig,
    pub start_cell: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_len: 1,
            n_wid: 16,
            k: 1,
            sigma: 1.0 / 16.0,
            fov: FovPreset::Line3,
            m_episodes: 500,
            t_steps: 16,
            horizon: 8,
            gamma: 0.9,
            n_beta: 10,
            n_y: 5,
            recovery: RecoveryConfig::default(),
            start_cell: 0,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_len, self.n_wid)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        grid.check_cell(self.start_cell)?;
        if self.k == 0 || self.k > grid.cells() {
            return Err(Error::InvalidConfig(format!("bad target count {}", self.k)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.m_episodes == 0 || self.t_steps == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("episode counts must be positive".into()));
        }
        if self.horizon > self.t_steps {
            return Err(Error::InvalidConfig(format!(
                "horizon {} exceeds episode length {}",
                self.horizon, self.t_steps
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.n_beta == 0 || self.n_y == 0 {
            return Err(Error::InvalidConfig("n_beta and n_y must be positive".into()));
        }
        Ok(())
    }
}

/// One behavior-policy episode. Index `t` of every per-step vector refers
/// to decision step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub env_seed: u64,
    pub beta: Vec<u8>,
    /// Belief image before step `t`.
    pub states: Vec<Vec<f64>>,
    /// Executed template index.
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Agent cell before step `t`.
    pub locations: Vec<usize>,
    /// Belief image after the last step.
    pub final_state: Vec<f64>,
}

impl EpisodeRecord {
    pub fn final_belief(&self, grid: Grid) -> BeliefState {
        let n = grid.cells();
        BeliefState {
            grid,
            mean: self.final_state[..n].to_vec(),
            var: self.final_state[n..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub episodes: Vec<EpisodeRecord>,
}

fn generate_episode(cfg: &DatasetConfig, actions: &[SensingAction], index: usize) -> Result<EpisodeRecord> {
    let env_seed = rng::derive_seed(cfg.seed, index as u64);
    let env = Environment::new(cfg.n_len, cfg.n_wid, cfg.k, cfg.sigma, cfg.fov.clone(), env_seed)?;
    let mut obs_rng = rng::seeded(rng::derive_seed(env_seed, stream::OBSERVE));
    let mut label_rng = rng::seeded(rng::derive_seed(env_seed, stream::LABELS));
    let mut belief = BeliefState::new(env.grid, cfg.sigma);
    let mut cell = cfg.start_cell;
    let t = cfg.t_steps;
    let mut rec = EpisodeRecord {
        env_seed,
        beta: env.beta_true.clone(),
        states: Vec::with_capacity(t),
        actions: Vec::with_capacity(t),
        rewards: Vec::with_capacity(t),
        locations: Vec::with_capacity(t),
        final_state: Vec::new(),
    };
    for step in 0..t {
        let a = eig_select(&belief, actions, cfg.sigma)?;
        let action = &actions[a];
        let reward = belief.expected_onestep_reward(
            action,
            cfg.sigma,
            &cfg.recovery,
            cfg.n_beta,
            cfg.n_y,
            &mut label_rng,
        )?;
        rec.states.push(belief.state_image().data);
        rec.actions.push(a);
        rec.rewards.push(reward);
        rec.locations.push(cell);
        let obs = env.observe(action, step, &mut obs_rng)?;
        belief.absorb_readings(&action.cells, &obs.values, cfg.sigma)?;
        cell = action.origin;
    }
    rec.final_state = belief.state_image().data;
    Ok(rec)
}

/// Runs `m_episodes` information-greedy episodes in parallel. Episode `i`
/// uses seed `derive_seed(config.seed, i)`, so the result does not depend
/// on scheduling.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let actions = env::enumerate_actions(config.grid()?, &config.fov);
    let episodes = (0..config.m_episodes)
        .into_par_iter()
        .map(|i| generate_episode(config, &actions, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: config.clone(),
        episodes,
    })
}

/// `sum_{i < H} gamma^i r[i]`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |acc, r| r + gamma * acc)
}

/// A length-`H` window of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub episode: usize,
    pub t: usize,
    pub state: Vec<f64>,
    pub actions: Vec<usize>,
    pub ret: f64,
    /// Agent cell before the first action of the window.
    pub start_cell: usize,
}

/// All windows `t = 0..=T-H` of every episode.
pub fn chunk_episodes(dataset: &Dataset, horizon: usize, gamma: f64) -> Result<Vec<Chunk>> {
    let t_steps = dataset.config.t_steps;
    if horizon == 0 || horizon > t_steps {
        return Err(Error::InvalidConfig(format!(
            "horizon {horizon} must be in 1..={t_steps}"
        )));
    }
    let mut chunks = Vec::with_capacity(dataset.episodes.len() * (t_steps - horizon + 1));
    for (e, ep) in dataset.episodes.iter().enumerate() {
        for t in 0..=t_steps - horizon {
            chunks.push(Chunk {
                episode: e,
                t,
                state: ep.states[t].clone(),
                actions: ep.actions[t..t + horizon].to_vec(),
                ret: discounted_return(&ep.rewards[t..t + horizon], gamma),
                start_cell: ep.locations[t],
            });
        }
    }
    Ok(chunks)
}

/// Codes chunks as +-1 frames and attaches distance labels.
pub fn training_samples(
    chunks: &[Chunk],
    actions: &[SensingAction],
    layout: &ModelLayout,
) -> Result<Vec<TrainingSample>> {
    let n = layout.n();
    chunks
        .iter()
        .map(|c| {
            if c.actions.len() != layout.horizon {
                return Err(Error::DimensionMismatch {
                    context: "chunk horizon",
                    expected: layout.horizon,
                    got: c.actions.len(),
                });
            }
            let mut tau = Vec::with_capacity(layout.frame_len());
            for &a in &c.actions {
                let action = actions.get(a).ok_or(Error::OutOfBounds {
                    cell: a,
                    n: actions.len(),
                })?;
                tau.extend(action.coded_mask(n));
            }
            let distance = env::path_length(
                layout.grid,
                c.start_cell,
                c.actions.iter().map(|&a| actions[a].origin),
            );
            Ok(TrainingSample {
                state: c.state.clone(),
                tau,
                ret: c.ret,
                distance,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub episodes: usize,
    pub steps: usize,
    pub cells: usize,
    pub config: DatasetConfig,
}

/// Writes a text header, a JSON manifest line and then one fixed-size
/// little-endian binary record per episode.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    let cfg = &dataset.config;
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        episodes: dataset.episodes.len(),
        steps: cfg.t_steps,
        cells: cfg.grid()?.cells(),
        config: cfg.clone(),
    };
    writeln!(w, "{MAGIC} {DATASET_FORMAT_VERSION}")?;
    let json = serde_json::to_string(&manifest).map_err(|e| Error::format("dataset manifest", e.to_string()))?;
    writeln!(w, "{json}")?;
    for ep in &dataset.episodes {
        w.write_all(&ep.env_seed.to_le_bytes())?;
        w.write_all(&ep.beta)?;
        for s in &ep.states {
            for v in s {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for &a in &ep.actions {
            w.write_all(&(a as u32).to_le_bytes())?;
        }
        for r in &ep.rewards {
            w.write_all(&r.to_le_bytes())?;
        }
        for &c in &ep.locations {
            w.write_all(&(c as u32).to_le_bytes())?;
        }
        for v in &ep.final_state {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Streaming reader over the episodes of a dataset file.
pub struct DatasetReader<R> {
    inner: R,
    pub manifest: DatasetManifest,
    remaining: usize,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut line = String::new();
        inner.read_line(&mut line)?;
        let expected = format!("{MAGIC} {DATASET_FORMAT_VERSION}");
        if line.trim_end() != expected {
            return Err(Error::format("dataset", format!("bad header `{}`", line.trim_end())));
        }
        line.clear();
        inner.read_line(&mut line)?;
        let manifest: DatasetManifest = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::format("dataset manifest", e.to_string()))?;
        manifest.config.validate()?;
        if manifest.steps != manifest.config.t_steps
            || manifest.cells != manifest.config.n_len * manifest.config.n_wid
        {
            return Err(Error::format("dataset manifest", "counts disagree with config"));
        }
        Ok(Self {
            inner,
            remaining: manifest.episodes,
            manifest,
        })
    }

    fn read_f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut buf = vec![0u8; count * 8];
        self.inner.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn read_u32s(&mut self, count: usize) -> Result<Vec<usize>> {
        let mut buf = vec![0u8; count * 4];
        self.inner.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .collect())
    }

    fn read_episode(&mut self) -> Result<EpisodeRecord> {
        let (t, n) = (self.manifest.steps, self.manifest.cells);
        let mut seed = [0u8; 8];
        self.inner.read_exact(&mut seed)?;
        let mut beta = vec![0u8; n];
        self.inner.read_exact(&mut beta)?;
        if beta.iter().any(|&b| b > 1) {
            return Err(Error::format("dataset", "non-binary target vector"));
        }
        let flat = self.read_f64s(t * 2 * n)?;
        let states = flat.chunks(2 * n).map(<[f64]>::to_vec).collect();
        let actions = self.read_u32s(t)?;
        let rewards = self.read_f64s(t)?;
        let locations = self.read_u32s(t)?;
        let final_state = self.read_f64s(2 * n)?;
        Ok(EpisodeRecord {
            env_seed: u64::from_le_bytes(seed),
            beta,
            states,
            actions,
            rewards,
            locations,
            final_state,
        })
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<EpisodeRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let ep = self.read_episode();
        if ep.is_err() {
            self.remaining = 0;
        }
        Some(ep)
    }
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut r = DatasetReader::new(reader)?;
    let config = r.manifest.config.clone();
    let episodes = r.by_ref().collect::<Result<Vec<_>>>()?;
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(Error::format("dataset", "trailing bytes after last episode"));
    }
    Ok(Dataset { config, episodes })
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    write_dataset(dataset, BufWriter::new(File::create(path)?))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into
/// the end bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0; bins.max(1)];
        let width = (hi - lo) / counts.len() as f64;
        for v in values {
            let b = ((v - lo) / width).floor();
            let b = if b.is_nan() { 0.0 } else { b.clamp(0.0, (counts.len() - 1) as f64) };
            counts[b as usize] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

impl fmt::Display for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1);
        for (i, &c) in self.counts.iter().enumerate() {
            let a = self.lo + width * i as f64;
            let bar = "#".repeat(c * 40 / peak);
            writeln!(f, "[{:>8.3}, {:>8.3}) {:>8} {bar}", a, a + width, c)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelStats {
    pub episodes: usize,
    pub chunks: usize,
    pub rewards: Histogram,
    pub returns: Histogram,
}

pub fn label_stats(dataset: &Dataset, horizon: usize, gamma: f64, bins: usize) -> Result<LabelStats> {
    let chunks = chunk_episodes(dataset, horizon, gamma)?;
    let bound: f64 = (0..horizon).map(|i| gamma.powi(i as i32)).sum();
    Ok(LabelStats {
        episodes: dataset.episodes.len(),
        chunks: chunks.len(),
        rewards: Histogram::new(
            dataset.episodes.iter().flat_map(|e| e.rewards.iter().copied()),
            -1.0,
            1.0,
            bins,
        ),
        returns: Histogram::new(chunks.iter().map(|c| c.ret), -bound, bound, bins),
    })
}
