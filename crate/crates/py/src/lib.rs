//! Python bindings for environments, beliefs, planners and experiments.

use std::path::PathBuf;
use std::sync::Arc;

use cdas_core::diffusion::{DiffusionPlanner, ModelBundle, SamplerConfig};
use cdas_core::experiment::{self, ExperimentConfig};
use cdas_core::mcts::{MctsConfig, MctsPlanner};
use cdas_core::myopic::{EigPlanner, TsPlanner};
use cdas_core::rng::{self, stream, SimRng};
use cdas_core::{
    datagen, BeliefState, CostModel, DecisionContext, FovPreset, Planner, RecoveryConfig,
    SensingAction,
};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: cdas_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Environment")]
struct PyEnvironment {
    inner: cdas_core::Environment,
    actions: Vec<SensingAction>,
    rng: SimRng,
}

#[pymethods]
impl PyEnvironment {
    #[new]
    #[pyo3(signature = (n_len, n_wid, k=1, sigma=1.0/16.0, fov="line3", seed=0))]
    fn new(n_len: usize, n_wid: usize, k: usize, sigma: f64, fov: &str, seed: u64) -> PyResult<Self> {
        let fov = FovPreset::parse(fov).map_err(err)?;
        let inner = cdas_core::Environment::new(n_len, n_wid, k, sigma, fov, seed).map_err(err)?;
        let actions = inner.actions();
        Ok(Self {
            inner,
            actions,
            rng: rng::seeded(rng::derive_seed(seed, stream::OBSERVE)),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn targets(&self) -> Vec<usize> {
        self.inner.targets()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// `(origin, cells)` of one sensing action.
    fn action(&self, index: usize) -> PyResult<(usize, Vec<usize>)> {
        let a = self.action_ref(index)?;
        Ok((a.origin, a.cells.clone()))
    }

    /// Noisy readings of the action's cells; advances the observation stream.
    fn observe(&mut self, index: usize) -> PyResult<Vec<f64>> {
        let a = self.action_ref(index)?.clone();
        Ok(self.inner.observe(&a, 0, &mut self.rng).map_err(err)?.values)
    }

    fn __repr__(&self) -> String {
        format!(
            "Environment({}x{}, k={}, sigma={})",
            self.inner.grid.n_len, self.inner.grid.n_wid, self.inner.k, self.inner.sigma
        )
    }
}

impl PyEnvironment {
    fn action_ref(&self, index: usize) -> PyResult<&SensingAction> {
        self.actions
            .get(index)
            .ok_or_else(|| PyIndexError::new_err(format!("action {index} out of range")))
    }
}

#[pyclass(name = "Belief")]
struct PyBelief {
    inner: BeliefState,
    sigma: f64,
}

#[pymethods]
impl PyBelief {
    /// Prior `N(0, sigma^2 I)` over the environment's grid.
    #[new]
    fn new(env: &PyEnvironment) -> Self {
        Self {
            inner: BeliefState::new(env.inner.grid, env.inner.sigma),
            sigma: env.inner.sigma,
        }
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.clone()
    }

    #[getter]
    fn var(&self) -> Vec<f64> {
        self.inner.var.clone()
    }

    /// Mean channel followed by variance channel.
    fn state_image(&self) -> Vec<f64> {
        self.inner.state_image().data
    }

    fn absorb(&mut self, env: &PyEnvironment, action: usize, values: Vec<f64>) -> PyResult<()> {
        let a = env.action_ref(action)?;
        self.inner
            .absorb_readings(&a.cells, &values, self.sigma)
            .map_err(err)
    }

    fn information_gain(&self, env: &PyEnvironment, action: usize) -> PyResult<f64> {
        Ok(self
            .inner
            .expected_information_gain(env.action_ref(action)?, self.sigma))
    }

    fn entropy(&self) -> f64 {
        self.inner.entropy()
    }

    /// Recovery of the thresholded mean against the true targets.
    #[pyo3(signature = (env, c_thr=0.5))]
    fn recovery<'py>(&self, py: Python<'py>, env: &PyEnvironment, c_thr: f64) -> PyResult<Bound<'py, PyDict>> {
        let cfg = RecoveryConfig::new(c_thr, true).map_err(err)?;
        let r = self.inner.recovery(&env.inner.beta_true, &cfg);
        let d = PyDict::new(py);
        d.set_item("fraction", r.fraction)?;
        d.set_item("exact", r.exact)?;
        d.set_item("found", r.found)?;
        d.set_item("false_positives", r.false_positives)?;
        Ok(d)
    }
}

/// A planner of any kind behind one interface.
#[pyclass(name = "Planner")]
struct PyPlanner {
    inner: Box<dyn Planner + Sync>,
    cost: CostModel,
}

#[pymethods]
impl PyPlanner {
    #[staticmethod]
    fn eig() -> Self {
        Self {
            inner: Box::new(EigPlanner),
            cost: CostModel::default(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (n_y=5, seed=0))]
    fn ts(n_y: usize, seed: u64) -> Self {
        Self {
            inner: Box::new(TsPlanner::new(RecoveryConfig::default(), n_y, seed)),
            cost: CostModel::default(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (budget=5000, depth=2, speed=1.0, sense_cost=0.0, seed=0))]
    fn mcts(budget: usize, depth: usize, speed: f64, sense_cost: f64, seed: u64) -> PyResult<Self> {
        let cost = CostModel::new(speed, sense_cost).map_err(err)?;
        let config = MctsConfig {
            budget,
            depth,
            cost_model: cost,
            ..MctsConfig::default()
        };
        Ok(Self {
            inner: Box::new(MctsPlanner::new(config, seed)),
            cost,
        })
    }

    /// Diffusion planner over a trained model directory. `lambda_cost = 0`
    /// gives the cost-unaware variant.
    #[staticmethod]
    #[pyo3(signature = (model_dir, n_diff=1000, alpha_guide=10.0, lambda_cost=0.0, speed=1.0, sense_cost=0.0, seed=0))]
    fn diffusion(
        model_dir: PathBuf,
        n_diff: usize,
        alpha_guide: f64,
        lambda_cost: f64,
        speed: f64,
        sense_cost: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let bundle = ModelBundle::load(&model_dir).map_err(err)?;
        let cfg = SamplerConfig {
            n_diff,
            alpha_guide,
            lambda_cost,
            ..SamplerConfig::default()
        };
        Ok(Self {
            inner: Box::new(DiffusionPlanner::new(Arc::new(bundle), cfg, seed)),
            cost: CostModel::new(speed, sense_cost).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[pyo3(signature = (belief, env, current_cell=0))]
    fn decide(&mut self, py: Python<'_>, belief: &PyBelief, env: &PyEnvironment, current_cell: usize) -> PyResult<usize> {
        env.inner.grid.check_cell(current_cell).map_err(err)?;
        let ctx = DecisionContext {
            belief: &belief.inner,
            actions: &env.actions,
            current_cell,
            sigma: env.inner.sigma,
            cost_model: &self.cost,
        };
        let planner = &mut self.inner;
        py.detach(|| planner.decide(&ctx)).map_err(err)
    }
}

/// Parsed experiment configuration with optional `key=value` overrides.
#[pyclass(name = "Experiment")]
struct PyExperiment {
    cfg: ExperimentConfig,
}

fn row_dict<'py>(py: Python<'py>, r: &experiment::MetricsRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("trial", r.trial)?;
    d.set_item("algo", &r.algo)?;
    d.set_item("measurement_index", r.measurement_index)?;
    d.set_item("recovery_fraction", r.recovery_fraction)?;
    d.set_item("exact_recovery_flag", r.exact_recovery_flag)?;
    d.set_item("cumulative_cost_s", r.cumulative_cost_s)?;
    d.set_item("decision_wallclock_s", r.decision_wallclock_s)?;
    d.set_item("agent_id", r.agent_id)?;
    Ok(d)
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (toml="", overrides=Vec::new()))]
    fn new(toml: &str, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            cfg: ExperimentConfig::from_toml_str(toml, &overrides).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides=Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            cfg: ExperimentConfig::load(&path, &overrides).map_err(err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.cfg.to_toml()
    }

    /// Runs every configured trial and returns the per-measurement rows.
    fn run<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let cfg = &self.cfg;
        let rows = py
            .detach(|| -> cdas_core::Result<_> {
                let bundle = cfg.load_bundle()?;
                let results = experiment::run_trials(cfg, bundle.as_ref())?;
                Ok(experiment::metrics_rows(&results, cfg.record_wallclock))
            })
            .map_err(err)?;
        rows.iter().map(|r| row_dict(py, r)).collect()
    }

    /// Generates the offline dataset and writes it to `path`.
    fn generate_dataset(&self, py: Python<'_>, path: PathBuf) -> PyResult<usize> {
        let cfg = self.cfg.dataset_config();
        py.detach(|| -> cdas_core::Result<usize> {
            let ds = datagen::generate_dataset(&cfg)?;
            datagen::save_dataset(&ds, &path)?;
            Ok(ds.episodes.len())
        })
        .map_err(err)
    }

    /// Trains all three networks on a dataset file and saves the bundle.
    /// Returns the final loss of each network.
    fn train(&self, py: Python<'_>, data: PathBuf, out_dir: PathBuf) -> PyResult<(f64, f64, f64)> {
        let cfg = &self.cfg;
        py.detach(|| -> cdas_core::Result<_> {
            let ds = datagen::load_dataset(&data)?;
            let (bundle, curves) = experiment::train_bundle(&ds, &cfg.train, cfg.seed)?;
            bundle.save(&out_dir)?;
            let last = |c: &Vec<f64>| c.last().copied().unwrap_or(f64::NAN);
            Ok((last(&curves.trajectory), last(&curves.returns), last(&curves.distance)))
        })
        .map_err(err)
    }
}

#[pymodule]
fn cdas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyBelief>()?;
    m.add_class::<PyPlanner>()?;
    m.add_class::<PyExperiment>()?;
    m.add("ALGORITHMS", experiment::ALGORITHMS.to_vec())?;
    Ok(())
}
