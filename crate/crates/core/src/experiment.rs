//! Experiment harness: configuration, planner construction, parallel
//! trials, metrics files and summaries.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::RecoveryConfig;
use crate::datagen::{self, Dataset, DatasetConfig};
use crate::diffusion::{
    self, BundleManifest, DiffusionPlanner, LossCurve, ModelBundle, ModelLayout, NetConfig,
    NoiseSchedule, ReverseMeanMode, SamplerConfig, BUNDLE_FORMAT_VERSION,
};
use crate::env::{self, CostModel, Environment, FovPreset};
use crate::error::{Error, Result};
use crate::mcts::{MctsConfig, MctsPlanner};
use crate::myopic::{EigPlanner, TsPlanner};
use crate::nn::MODEL_FORMAT_VERSION;
use crate::planner::Planner;
use crate::rng::{self, stream};
use crate::sim::{self, ChannelConfig, RunLog, SimConfig};

pub const METRICS_SCHEMA: &str = "cdas-metrics";
pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const ALGORITHMS: [&str; 5] = ["eig", "ts", "mcts", "das", "cdas"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub n_len: usize,
    pub n_wid: usize,
    pub k: usize,
    pub sigma: f64,
    pub fov: FovPreset,
    pub start_cell: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            n_len: 1,
            n_wid: 16,
            k: 1,
            sigma: 1.0 / 16.0,
            fov: FovPreset::Line3,
            start_cell: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub algos: Vec<String>,
    pub agents: usize,
    pub t_max: usize,
    pub idle_tick_s: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            algos: vec!["eig".into()],
            agents: 1,
            t_max: 20,
            idle_tick_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsSection {
    pub n_y: usize,
}

impl Default for TsSection {
    fn default() -> Self {
        Self { n_y: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsSection {
    pub depth: usize,
    pub budget: usize,
    pub ucb_c: f64,
    pub epsilon_pareto: f64,
}

impl Default for MctsSection {
    fn default() -> Self {
        let d = MctsConfig::default();
        Self {
            depth: d.depth,
            budget: d.budget,
            ucb_c: d.ucb_c,
            epsilon_pareto: d.epsilon_pareto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSection {
    pub model_dir: Option<PathBuf>,
    pub n_diff: usize,
    pub alpha_guide: f64,
    /// Cost coefficient of `cdas`; `das` always uses zero.
    pub lambda_cost: f64,
    pub reverse_mean_mode: ReverseMeanMode,
    pub chunk_size: usize,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            model_dir: None,
            n_diff: s.n_diff,
            alpha_guide: s.alpha_guide,
            lambda_cost: 0.1,
            reverse_mean_mode: s.reverse_mean_mode,
            chunk_size: s.chunk_size,
        }
    }
}

impl DiffusionSection {
    pub fn sampler(&self, lambda_cost: f64) -> SamplerConfig {
        SamplerConfig {
            n_diff: self.n_diff,
            alpha_guide: self.alpha_guide,
            lambda_cost,
            reverse_mean_mode: self.reverse_mean_mode,
            chunk_size: self.chunk_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub m_episodes: usize,
    pub t_steps: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub n_beta: usize,
    pub n_y: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            m_episodes: d.m_episodes,
            t_steps: d.t_steps,
            horizon: d.horizon,
            gamma: d.gamma,
            n_beta: d.n_beta,
            n_y: d.n_y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub t_diff: usize,
    pub embed_dim: usize,
    pub return_noising: bool,
    pub epochs_trajectory: usize,
    pub epochs_return: usize,
    pub epochs_distance: usize,
    pub net: NetConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            t_diff: 64,
            embed_dim: 16,
            return_noising: false,
            epochs_trajectory: 60,
            epochs_return: 40,
            epochs_distance: 40,
            net: NetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Decisions timed per trial.
    pub decisions: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { decisions: 3 }
    }
}

/// Everything a command needs, read from TOML with `--set` overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
    /// When false the wall-clock column is written as zero so that metrics
    /// files are byte-reproducible.
    pub record_wallclock: bool,
    pub env: EnvSection,
    pub cost: CostModel,
    pub recovery: RecoveryConfig,
    pub run: RunSection,
    pub channel: ChannelConfig,
    pub ts: TsSection,
    pub mcts: MctsSection,
    pub diffusion: DiffusionSection,
    pub data: DataSection,
    pub train: TrainSection,
    pub bench: BenchSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 20,
            workers: 1,
            record_wallclock: true,
            env: EnvSection::default(),
            cost: CostModel::default(),
            recovery: RecoveryConfig::default(),
            run: RunSection::default(),
            channel: ChannelConfig::default(),
            ts: TsSection::default(),
            mcts: MctsSection::default(),
            diffusion: DiffusionSection::default(),
            data: DataSection::default(),
            train: TrainSection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// Sets `path` (dot separated) inside a TOML table. The value is parsed as
/// a TOML value when possible and kept as a string otherwise.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("bad override key `{key}`")));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("`{p}` in `{key}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.dataset_config().validate()?;
        CostModel::new(self.cost.speed, self.cost.sense_cost)?;
        RecoveryConfig::new(self.recovery.c_thr, self.recovery.assume_target_present)?;
        self.channel.validate()?;
        if self.trials == 0 || self.workers == 0 {
            return bad("trials and workers must be positive".into());
        }
        if self.run.algos.is_empty() {
            return bad("run.algos is empty".into());
        }
        for a in &self.run.algos {
            if !ALGORITHMS.contains(&a.as_str()) {
                return bad(format!("unknown algorithm `{a}`; expected one of {ALGORITHMS:?}"));
            }
        }
        if self.run.agents == 0 || self.run.t_max == 0 || !(self.run.idle_tick_s >= 0.0) {
            return bad("run.agents and run.t_max must be positive".into());
        }
        if self.ts.n_y == 0 {
            return bad("ts.n_y must be positive".into());
        }
        let m = &self.mcts;
        if m.depth == 0 || m.budget == 0 || !(m.ucb_c >= 0.0) || !(m.epsilon_pareto >= 0.0) {
            return bad(format!("bad mcts section {m:?}"));
        }
        let d = &self.diffusion;
        if d.n_diff == 0 || d.chunk_size == 0 || !(d.alpha_guide >= 0.0) || !(d.lambda_cost >= 0.0) {
            return bad(format!("bad diffusion section {d:?}"));
        }
        let t = &self.train;
        if t.t_diff == 0 || t.embed_dim == 0 || t.embed_dim % 2 != 0 {
            return bad("train.t_diff must be positive and train.embed_dim even".into());
        }
        if self.bench.decisions == 0 {
            return bad("bench.decisions must be positive".into());
        }
        Ok(())
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let (e, d) = (&self.env, &self.data);
        DatasetConfig {
            n_len: e.n_len,
            n_wid: e.n_wid,
            k: e.k,
            sigma: e.sigma,
            fov: e.fov.clone(),
            m_episodes: d.m_episodes,
            t_steps: d.t_steps,
            horizon: d.horizon,
            gamma: d.gamma,
            n_beta: d.n_beta,
            n_y: d.n_y,
            recovery: self.recovery,
            start_cell: e.start_cell,
            seed: self.seed,
        }
    }

    pub fn mcts_config(&self) -> MctsConfig {
        MctsConfig {
            depth: self.mcts.depth,
            budget: self.mcts.budget,
            ucb_c: self.mcts.ucb_c,
            cost_model: self.cost,
            epsilon_pareto: self.mcts.epsilon_pareto,
            recovery: self.recovery,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            t_max: self.run.t_max,
            start_cell: self.env.start_cell,
            idle_tick_s: self.run.idle_tick_s,
            recovery: self.recovery,
        }
    }

    pub fn needs_models(&self) -> bool {
        self.run.algos.iter().any(|a| a == "das" || a == "cdas")
    }

    pub fn load_bundle(&self) -> Result<Option<Arc<ModelBundle>>> {
        if !self.needs_models() {
            return Ok(None);
        }
        let dir = self.diffusion.model_dir.as_ref().ok_or_else(|| {
            Error::InvalidConfig("diffusion.model_dir is required for das/cdas".into())
        })?;
        let bundle = ModelBundle::load(dir)?;
        let layout = bundle.layout();
        if layout.grid.n_len != self.env.n_len || layout.grid.n_wid != self.env.n_wid {
            return Err(Error::InvalidConfig(format!(
                "model grid {:?} does not match env {}x{}",
                layout.grid, self.env.n_len, self.env.n_wid
            )));
        }
        Ok(Some(Arc::new(bundle)))
    }
}

/// Builds a planner by name with its own seed.
pub fn make_planner(
    name: &str,
    cfg: &ExperimentConfig,
    bundle: Option<&Arc<ModelBundle>>,
    seed: u64,
) -> Result<Box<dyn Planner>> {
    let need_bundle = || {
        bundle
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("`{name}` needs trained models")))
    };
    Ok(match name {
        "eig" => Box::new(EigPlanner),
        "ts" => Box::new(TsPlanner::new(cfg.recovery, cfg.ts.n_y, seed)),
        "mcts" => Box::new(MctsPlanner::new(cfg.mcts_config(), seed)),
        "das" => Box::new(DiffusionPlanner::new(need_bundle()?, cfg.diffusion.sampler(0.0), seed)),
        "cdas" => Box::new(DiffusionPlanner::new(
            need_bundle()?,
            cfg.diffusion.sampler(cfg.diffusion.lambda_cost),
            seed,
        )),
        other => return Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
    })
}

pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    rng::derive_seed(cfg.seed, trial as u64)
}

/// The environment of `trial`; shared by every algorithm.
pub fn trial_environment(cfg: &ExperimentConfig, trial: usize) -> Result<Environment> {
    let e = &cfg.env;
    Environment::new(e.n_len, e.n_wid, e.k, e.sigma, e.fov.clone(), trial_seed(cfg, trial))
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub algo: String,
    pub env: Environment,
    pub log: RunLog,
}

impl TrialResult {
    pub fn measurements_to_recovery(&self) -> Option<usize> {
        self.log.measurements_to_recovery()
    }
}

/// One trial of one algorithm with `cfg.run.agents` agents.
pub fn run_trial(
    cfg: &ExperimentConfig,
    algo: &str,
    bundle: Option<&Arc<ModelBundle>>,
    trial: usize,
) -> Result<TrialResult> {
    let env = trial_environment(cfg, trial)?;
    let seed = trial_seed(cfg, trial);
    let mut planners = (0..cfg.run.agents)
        .map(|j| make_planner(algo, cfg, bundle, rng::derive_seed(seed, stream::PLANNER + j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let channel = ChannelConfig {
        seed: rng::derive_seed(seed, stream::CHANNEL ^ cfg.channel.seed),
        ..cfg.channel
    };
    let mut obs_rng = rng::seeded(rng::derive_seed(seed, stream::OBSERVE));
    let log = sim::run_multiagent(&env, &mut planners, &cfg.cost, &channel, &cfg.sim_config(), &mut obs_rng)?;
    Ok(TrialResult {
        trial,
        algo: algo.to_string(),
        env,
        log,
    })
}

/// All trials of every configured algorithm, trials in parallel on
/// `cfg.workers` threads. Results are ordered by algorithm then trial.
pub fn run_trials(cfg: &ExperimentConfig, bundle: Option<&Arc<ModelBundle>>) -> Result<Vec<TrialResult>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let jobs: Vec<(&str, usize)> = cfg
        .run
        .algos
        .iter()
        .flat_map(|a| (0..cfg.trials).map(move |t| (a.as_str(), t)))
        .collect();
    pool.install(|| {
        jobs.par_iter()
            .map(|&(a, t)| run_trial(cfg, a, bundle, t))
            .collect()
    })
}

/// One row of the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub trial: usize,
    pub algo: String,
    pub measurement_index: usize,
    pub recovery_fraction: f64,
    pub exact_recovery_flag: u8,
    pub cumulative_cost_s: f64,
    pub decision_wallclock_s: f64,
    pub agent_id: usize,
}

pub fn metrics_rows(results: &[TrialResult], record_wallclock: bool) -> Vec<MetricsRow> {
    results
        .iter()
        .flat_map(|r| {
            r.log.entries.iter().map(move |e| MetricsRow {
                trial: r.trial,
                algo: r.algo.clone(),
                measurement_index: e.index,
                recovery_fraction: e.recovery_fraction,
                exact_recovery_flag: u8::from(e.exact),
                cumulative_cost_s: e.team_cost_s,
                decision_wallclock_s: if record_wallclock {
                    e.decision_wallclock.as_secs_f64()
                } else {
                    0.0
                },
                agent_id: e.agent,
            })
        })
        .collect()
}

/// Writes through a temporary sibling and renames, so a failed command
/// never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::format("csv", e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::format("csv", e.to_string()))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format("metrics csv", e.to_string()))?;
    let expected = [
        "trial",
        "algo",
        "measurement_index",
        "recovery_fraction",
        "exact_recovery_flag",
        "cumulative_cost_s",
        "decision_wallclock_s",
        "agent_id",
    ];
    let headers = r.headers().map_err(|e| Error::format("metrics csv", e.to_string()))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::format("metrics csv", format!("unexpected header {headers:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format("metrics csv", e.to_string())))
        .collect()
}

/// JSON sidecar written next to every CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: String,
    pub schema_version: u32,
    pub command: String,
    pub crate_version: String,
    pub rows: usize,
    pub config: Option<ExperimentConfig>,
    pub inputs: Vec<PathBuf>,
}

impl Sidecar {
    pub fn new(command: &str, rows: usize, config: Option<&ExperimentConfig>) -> Self {
        Self {
            schema: METRICS_SCHEMA.into(),
            schema_version: METRICS_SCHEMA_VERSION,
            command: command.into(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            rows,
            config: config.cloned(),
            inputs: Vec::new(),
        }
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `rows` to `path` and the sidecar next to it.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T], sidecar: &Sidecar) -> Result<()> {
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| Error::format("sidecar", e.to_string()))?;
    let csv = csv_bytes(rows)?;
    write_atomic(&sidecar_path(path), (json + "\n").as_bytes())?;
    write_atomic(path, &csv)
}

/// Per-algorithm outcome across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoSummary {
    pub algo: String,
    pub trials: usize,
    pub recovered: usize,
    /// Median of measurements to exact recovery over recovered trials.
    pub median_measurements: Option<f64>,
    pub mean_measurements: Option<f64>,
    pub mean_cost_at_recovery_s: Option<f64>,
    pub mean_decision_s: f64,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Summaries from metrics rows, in first-seen algorithm order.
pub fn summarize(rows: &[MetricsRow]) -> Vec<AlgoSummary> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(String, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        if !order.contains(&r.algo) {
            order.push(r.algo.clone());
        }
        groups.entry((r.algo.clone(), r.trial)).or_default().push(r);
    }
    order
        .into_iter()
        .map(|algo| {
            let trials: Vec<_> = groups.iter().filter(|((a, _), _)| *a == algo).collect();
            let mut counts = Vec::new();
            let mut costs = Vec::new();
            let mut times = Vec::new();
            for (_, rs) in &trials {
                if let Some(hit) = rs.iter().find(|r| r.exact_recovery_flag == 1) {
                    counts.push(hit.measurement_index as f64);
                    costs.push(hit.cumulative_cost_s);
                }
                times.extend(rs.iter().map(|r| r.decision_wallclock_s));
            }
            AlgoSummary {
                recovered: counts.len(),
                trials: trials.len(),
                mean_measurements: mean(&counts),
                median_measurements: median(&mut counts),
                mean_cost_at_recovery_s: mean(&costs),
                mean_decision_s: mean(&times).unwrap_or(0.0),
                algo,
            }
        })
        .collect()
}

/// Mean per-decision wall-clock per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algo: String,
    pub decisions: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

/// Times `bench.decisions` decisions per trial for each algorithm.
pub fn bench(cfg: &ExperimentConfig, bundle: Option<&Arc<ModelBundle>>) -> Result<Vec<BenchRow>> {
    let mut timed = cfg.clone();
    timed.run.t_max = cfg.bench.decisions;
    timed.workers = 1;
    let results = run_trials(&timed, bundle)?;
    Ok(cfg
        .run
        .algos
        .iter()
        .map(|algo| {
            let times: Vec<f64> = results
                .iter()
                .filter(|r| &r.algo == algo)
                .flat_map(|r| r.log.entries.iter().map(|e| e.decision_wallclock.as_secs_f64()))
                .collect();
            let m = mean(&times).unwrap_or(0.0);
            let var = if times.len() > 1 {
                times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (times.len() - 1) as f64
            } else {
                0.0
            };
            BenchRow {
                algo: algo.clone(),
                decisions: times.len(),
                mean_s: m,
                std_s: var.sqrt(),
            }
        })
        .collect())
}

/// One line of the training-curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub model: String,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingCurves {
    pub trajectory: LossCurve,
    pub returns: LossCurve,
    pub distance: LossCurve,
}

impl TrainingCurves {
    pub fn rows(&self) -> Vec<CurveRow> {
        [
            ("trajectory", &self.trajectory),
            ("return", &self.returns),
            ("distance", &self.distance),
        ]
        .into_iter()
        .flat_map(|(m, c)| {
            c.iter().enumerate().map(move |(i, &loss)| CurveRow {
                model: m.into(),
                epoch: i + 1,
                loss,
            })
        })
        .collect()
    }
}

/// Trains the three networks on a dataset with the given training section.
pub fn train_bundle(dataset: &Dataset, train: &TrainSection, seed: u64) -> Result<(ModelBundle, TrainingCurves)> {
    let dc = &dataset.config;
    let grid = dc.grid()?;
    let layout = ModelLayout::new(grid, dc.horizon, train.embed_dim, dc.sigma)?;
    let actions = env::enumerate_actions(grid, &dc.fov);
    let chunks = datagen::chunk_episodes(dataset, dc.horizon, dc.gamma)?;
    let samples = datagen::training_samples(&chunks, &actions, &layout)?;
    let schedule = NoiseSchedule::cosine(train.t_diff)?;
    let mut rng = rng::seeded(rng::derive_seed(seed, stream::TRAIN));
    let (trajectory, c1) = diffusion::train_trajectory_model(
        &samples,
        &layout,
        &schedule,
        &train.net,
        train.epochs_trajectory,
        &mut rng,
    )?;
    let (returns, c2) = diffusion::train_return_model(
        &samples,
        &layout,
        &schedule,
        train.return_noising,
        &train.net,
        train.epochs_return,
        &mut rng,
    )?;
    let (distance, c3) =
        diffusion::train_distance_model(&samples, &layout, &train.net, train.epochs_distance, &mut rng)?;
    let manifest = BundleManifest {
        format_version: BUNDLE_FORMAT_VERSION,
        layout,
        t_diff: train.t_diff,
        schedule: "cosine".into(),
        coding: "pm1".into(),
        fov: dc.fov.clone(),
        return_noising: train.return_noising,
        gamma: dc.gamma,
        model_format_version: MODEL_FORMAT_VERSION,
    };
    Ok((
        ModelBundle::new(manifest, trajectory, returns, distance)?,
        TrainingCurves {
            trajectory: c1,
            returns: c2,
            distance: c3,
        },
    ))
}
