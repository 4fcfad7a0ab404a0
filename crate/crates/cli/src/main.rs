use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cdas_core::datagen;
use cdas_core::diffusion::ModelBundle;
use cdas_core::experiment::{self, ExperimentConfig, Sidecar};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cdas", version, about = "Cost-aware active search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Override a configuration key, e.g. `--set env.sigma=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(t) = self.trials {
            overrides.push(format!("trials={t}"));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("workers={w}"));
        }
        let cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, &overrides)
                .with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::from_toml_str("", &overrides)?,
        };
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate an offline dataset with the information-greedy policy.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the trajectory, return and distance networks.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset file from `gen-data`.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for the model bundle.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run trials and write per-measurement metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time planner decisions.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Join metrics files and print per-algorithm summaries.
    Compare {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print label histograms of a dataset.
    Stats {
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
}

fn gen_data(common: &Common, out: &Path) -> Result<()> {
    let cfg = common.load()?;
    let ds = datagen::generate_dataset(&cfg.dataset_config())?;
    let mut bytes = Vec::new();
    datagen::write_dataset(&ds, &mut bytes)?;
    experiment::write_atomic(out, &bytes)?;
    println!(
        "wrote {} episodes x {} steps to {}",
        ds.episodes.len(),
        ds.config.t_steps,
        out.display()
    );
    Ok(())
}

fn train(common: &Common, data: &Path, out: &Path) -> Result<()> {
    let cfg = common.load()?;
    let ds = datagen::load_dataset(data).with_context(|| format!("reading {}", data.display()))?;
    let (bundle, curves) = experiment::train_bundle(&ds, &cfg.train, cfg.seed)?;
    bundle.save(out)?;
    let rows = curves.rows();
    let curve_path = out.join("training_curves.csv");
    let mut sidecar = Sidecar::new("train", rows.len(), Some(&cfg));
    sidecar.inputs.push(data.to_path_buf());
    experiment::write_table(&curve_path, &rows, &sidecar)?;
    for (name, c) in [
        ("trajectory", &curves.trajectory),
        ("return", &curves.returns),
        ("distance", &curves.distance),
    ] {
        if let (Some(first), Some(last)) = (c.first(), c.last()) {
            println!("{name:<10} loss {first:.4} -> {last:.4} over {} epochs", c.len());
        }
    }
    println!("models written to {}", out.display());
    Ok(())
}

fn load_models(cfg: &ExperimentConfig) -> Result<Option<std::sync::Arc<ModelBundle>>> {
    cfg.load_bundle().context("loading diffusion models")
}

fn run(common: &Common, out: &Path) -> Result<()> {
    let cfg = common.load()?;
    let bundle = load_models(&cfg)?;
    let results = experiment::run_trials(&cfg, bundle.as_ref())?;
    let rows = experiment::metrics_rows(&results, cfg.record_wallclock);
    experiment::write_table(out, &rows, &Sidecar::new("run", rows.len(), Some(&cfg)))?;
    print_summaries(&rows);
    Ok(())
}

fn bench(common: &Common, out: &Path) -> Result<()> {
    let cfg = common.load()?;
    let bundle = load_models(&cfg)?;
    let rows = experiment::bench(&cfg, bundle.as_ref())?;
    experiment::write_table(out, &rows, &Sidecar::new("bench", rows.len(), Some(&cfg)))?;
    println!("{:<8} {:>10} {:>14} {:>14}", "algo", "decisions", "mean_s", "std_s");
    for r in &rows {
        println!("{:<8} {:>10} {:>14.6} {:>14.6}", r.algo, r.decisions, r.mean_s, r.std_s);
    }
    Ok(())
}

fn compare(inputs: &[PathBuf], out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(experiment::read_metrics(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let mut sidecar = Sidecar::new("compare", rows.len(), None);
    sidecar.inputs = inputs.to_vec();
    experiment::write_table(out, &rows, &sidecar)?;
    print_summaries(&rows);
    Ok(())
}

fn print_summaries(rows: &[experiment::MetricsRow]) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
    println!(
        "{:<8} {:>7} {:>10} {:>12} {:>12} {:>14}",
        "algo", "trials", "recovered", "median_meas", "mean_cost_s", "mean_decide_s"
    );
    for s in experiment::summarize(rows) {
        println!(
            "{:<8} {:>7} {:>10} {:>12} {:>12} {:>14.6}",
            s.algo,
            s.trials,
            s.recovered,
            fmt(s.median_measurements),
            fmt(s.mean_cost_at_recovery_s),
            s.mean_decision_s
        );
    }
}

fn stats(data: &Path, bins: usize) -> Result<()> {
    if bins == 0 {
        bail!("--bins must be positive");
    }
    let ds = datagen::load_dataset(data).with_context(|| format!("reading {}", data.display()))?;
    let c = &ds.config;
    let s = datagen::label_stats(&ds, c.horizon, c.gamma, bins)?;
    println!(
        "{} episodes, {} steps, {} chunks (H={}, gamma={})",
        s.episodes, c.t_steps, s.chunks, c.horizon, c.gamma
    );
    println!("reward labels:\n{}", s.rewards);
    println!("return labels:\n{}", s.returns);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData { common, out } => gen_data(common, out),
        Command::Train { common, data, out } => train(common, data, out),
        Command::Run { common, out } => run(common, out),
        Command::Bench { common, out } => bench(common, out),
        Command::Compare { inputs, out } => compare(inputs, out),
        Command::Stats { data, bins } => stats(data, *bins),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
