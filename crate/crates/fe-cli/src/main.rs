//! `fe`: experiment harness for the explore/exploit policy suite.
//!
//! Every run is driven by a single TOML config; command-line flags override
//! individual fields. Exit codes: 0 success, 2 invalid configuration,
//! 3 training divergence (partial artifacts are left in the output
//! directory).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use first_explore::config::{ConfigError, DomainConfig, ExperimentConfig, Treatment};
use first_explore::experiment::{
    oracle_rows, run_eval, run_experiment, run_select_k, ExperimentError, Manifest,
};
use first_explore::stats::mann_whitney_u;

#[derive(Parser)]
#[command(
    name = "fe",
    version,
    about = "Train, select, evaluate, and compare in-context exploration policies."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and run the full pipeline: train, select k, evaluate.
    Train(ConfigArgs),
    /// Recompute the k sweep for an existing run directory.
    SelectK {
        /// Run directory containing config.toml and checkpoint.fepc.
        run_dir: PathBuf,
    },
    /// Re-evaluate an existing run directory.
    Eval {
        /// Run directory containing config.toml and checkpoint.fepc.
        run_dir: PathBuf,
        /// Explore for exactly k episodes before exploiting (default: the
        /// stored k*).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run a non-learned baseline: ucb1, ts, or random.
    Baseline(ConfigArgs),
    /// Print closed-form reference values, checked by simulation.
    Oracle(ConfigArgs),
    /// Mann-Whitney U test between two samples (one number per line).
    Stats {
        /// First sample file.
        a: PathBuf,
        /// Second sample file.
        b: PathBuf,
    },
    /// Run the configured experiment once per seed in 1..=5.
    Sweep(ConfigArgs),
}

/// Config source plus field-level overrides, shared by the run subcommands.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML experiment config; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Domain to run: bandit, darkroom, or raymaze.
    #[arg(long)]
    domain: Option<String>,
    /// Treatment to apply (subcommands restrict what is sensible).
    #[arg(long)]
    treatment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    // bandit parameters
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    pulls: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    mu1: Option<f64>,
    #[arg(long)]
    noise_variance: Option<f64>,

    // grid parameters
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long)]
    p_treasure: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,

    // model shape
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,

    // training
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    warmup_frac: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    sync_period: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    baseline_b: Option<f64>,

    // evaluation sizes
    #[arg(long)]
    selection_envs: Option<usize>,
    #[arg(long)]
    eval_envs: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self, default_treatment: Treatment) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::load(path)?;
                if let Some(d) = &self.domain {
                    if d != cfg.domain.name() {
                        return Err(ConfigError(format!(
                            "--domain {d} conflicts with the config file's {} domain",
                            cfg.domain.name()
                        )));
                    }
                }
                cfg
            }
            None => {
                let mut cfg =
                    ExperimentConfig::template(self.domain.as_deref().unwrap_or("bandit"))?;
                cfg.treatment = default_treatment;
                cfg
            }
        };
        if let Some(t) = &self.treatment {
            cfg.treatment = Treatment::parse(t)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        self.apply_domain_overrides(&mut cfg)?;
        if let Some(v) = self.hidden {
            cfg.model.hidden = v;
        }
        if let Some(v) = self.heads {
            cfg.model.heads = v;
        }
        if let Some(v) = self.layers {
            cfg.model.layers = v;
        }
        if let Some(v) = self.updates {
            cfg.train.updates = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.warmup_frac {
            cfg.train.warmup_frac = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.train.weight_decay = v;
        }
        if let Some(v) = self.clip_norm {
            cfg.train.clip_norm = v;
        }
        if let Some(v) = self.sync_period {
            cfg.train.sync_period = v;
        }
        if let Some(v) = self.epsilon {
            cfg.train.epsilon = v;
        }
        if let Some(v) = self.temperature {
            cfg.train.temperature = v;
        }
        if let Some(v) = self.baseline_b {
            cfg.train.baseline_b = v;
        }
        if let Some(v) = self.selection_envs {
            cfg.selection.envs = v;
        }
        if let Some(v) = self.eval_envs {
            cfg.eval.envs = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_domain_overrides(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        fn reject(flag: &str, domain: &str) -> ConfigError {
            ConfigError(format!("--{flag} does not apply to the {domain} domain"))
        }
        match &mut cfg.domain {
            DomainConfig::Bandit { arms, pulls, mu1, noise_variance } => {
                for (set, flag) in [
                    (self.rho.is_some(), "rho"),
                    (self.p_treasure.is_some(), "p-treasure"),
                    (self.steps.is_some(), "steps"),
                    (self.episodes.is_some(), "episodes"),
                ] {
                    if set {
                        return Err(reject(flag, "bandit"));
                    }
                }
                if let Some(v) = self.arms {
                    *arms = v;
                }
                if let Some(v) = self.pulls {
                    *pulls = v;
                }
                if let Some(v) = self.mu1 {
                    *mu1 = v;
                }
                if let Some(v) = self.noise_variance {
                    *noise_variance = v;
                }
            }
            DomainConfig::Darkroom { rho, steps, episodes } => {
                for (set, flag) in [
                    (self.arms.is_some(), "arms"),
                    (self.pulls.is_some(), "pulls"),
                    (self.mu1.is_some(), "mu1"),
                    (self.noise_variance.is_some(), "noise-variance"),
                    (self.p_treasure.is_some(), "p-treasure"),
                ] {
                    if set {
                        return Err(reject(flag, "darkroom"));
                    }
                }
                if let Some(v) = self.rho {
                    *rho = v;
                }
                if let Some(v) = self.steps {
                    *steps = v;
                }
                if let Some(v) = self.episodes {
                    *episodes = v;
                }
            }
            DomainConfig::Raymaze { p_treasure, steps, episodes } => {
                for (set, flag) in [
                    (self.arms.is_some(), "arms"),
                    (self.pulls.is_some(), "pulls"),
                    (self.mu1.is_some(), "mu1"),
                    (self.noise_variance.is_some(), "noise-variance"),
                    (self.rho.is_some(), "rho"),
                ] {
                    if set {
                        return Err(reject(flag, "raymaze"));
                    }
                }
                if let Some(v) = self.p_treasure {
                    *p_treasure = v;
                }
                if let Some(v) = self.steps {
                    *steps = v;
                }
                if let Some(v) = self.episodes {
                    *episodes = v;
                }
            }
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<ExperimentError>() {
        return e.exit_code() as u8;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve(Treatment::FirstExplore)?;
            if !cfg.treatment.is_learned() {
                return Err(ConfigError(format!(
                    "train runs learned treatments; use `baseline` for {} or `oracle` for the closed forms",
                    cfg.treatment.as_str()
                ))
                .into());
            }
            let manifest = run_experiment(&cfg)?;
            print_manifest(&manifest, &cfg);
            Ok(())
        }
        Command::SelectK { run_dir } => {
            let (manifest, curve) = run_select_k(&run_dir)?;
            println!("run {}: k sweep over {} envs", manifest.run_id, curve.points[0].n_envs);
            for p in &curve.points {
                let marker = if p.k == curve.k_star { "  <- k*" } else { "" };
                println!("  k = {:>3}: mean total {:>10.4}  (std {:.4}){marker}", p.k, p.mean, p.std);
            }
            Ok(())
        }
        Command::Eval { run_dir, k } => {
            let (manifest, summary) = run_eval(&run_dir, k)?;
            if let Some(k) = manifest.k_star {
                println!("run {}: evaluated at k = {k}", manifest.run_id);
            } else {
                println!("run {}: evaluated", manifest.run_id);
            }
            println!(
                "  mean total reward {:.4} (std {:.4}) over {} envs",
                summary.mean_total, summary.std_total, summary.n_envs
            );
            Ok(())
        }
        Command::Baseline(args) => {
            let cfg = args.resolve(Treatment::Random)?;
            if !matches!(cfg.treatment, Treatment::Ucb1 | Treatment::Ts | Treatment::Random) {
                return Err(ConfigError(format!(
                    "baseline runs ucb1, ts, or random, not {}",
                    cfg.treatment.as_str()
                ))
                .into());
            }
            let manifest = run_experiment(&cfg)?;
            print_manifest(&manifest, &cfg);
            Ok(())
        }
        Command::Oracle(args) => {
            let cfg = args.resolve(Treatment::Oracle)?;
            if cfg.treatment != Treatment::Oracle {
                return Err(ConfigError(
                    "the oracle subcommand runs the oracle treatment only".into(),
                )
                .into());
            }
            for row in oracle_rows(&cfg) {
                match (row.mc_estimate, row.n_samples, row.tolerance) {
                    (Some(mc), Some(n), Some(tol)) => println!(
                        "{}: formula {:.2}, mc {:.4} (n = {n}, tol = {tol}) {}",
                        row.label, row.formula, mc, row.status
                    ),
                    _ => println!("{}: formula {:.2} (analytic)", row.label, row.formula),
                }
            }
            Ok(())
        }
        Command::Stats { a, b } => {
            let sample_a = read_sample(&a)?;
            let sample_b = read_sample(&b)?;
            let result = mann_whitney_u(&sample_a, &sample_b);
            println!("U = {}, p = {:.6}", result.u, result.p);
            println!("{}", result.describe());
            Ok(())
        }
        Command::Sweep(args) => {
            let base = args.resolve(Treatment::FirstExplore)?;
            let base_dir = base.out_dir.clone();
            let mut rows = Vec::new();
            for seed in 1..=5u64 {
                let mut cfg = base.clone();
                cfg.seed = seed;
                cfg.out_dir = base_dir.join(format!("seed-{seed}"));
                let manifest = run_experiment(&cfg)?;
                print_manifest(&manifest, &cfg);
                rows.push(manifest);
            }
            write_sweep_csv(&base_dir, &rows)?;
            println!("sweep summary: {}", base_dir.join("sweep.csv").display());
            Ok(())
        }
    }
}

fn print_manifest(manifest: &Manifest, cfg: &ExperimentConfig) {
    let mut line = format!(
        "run {}: {} on {} (seed {})",
        manifest.run_id, manifest.treatment, manifest.domain, manifest.seed
    );
    if let Some(k) = manifest.k_star {
        line.push_str(&format!(", k* = {k}"));
    }
    if let Some(total) = manifest.mean_total_reward {
        line.push_str(&format!(", mean total reward {total:.4}"));
    }
    println!("{line}");
    println!("  artifacts in {}", cfg.out_dir.display());
}

fn read_sample(path: &PathBuf) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read sample file {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line
            .parse()
            .with_context(|| format!("{}:{}: not a number: {line:?}", path.display(), i + 1))?;
        values.push(value);
    }
    if values.is_empty() {
        bail!("{} holds no numbers", path.display());
    }
    Ok(values)
}

fn write_sweep_csv(base_dir: &std::path::Path, manifests: &[Manifest]) -> Result<()> {
    let mut writer = csv::Writer::from_path(base_dir.join("sweep.csv"))?;
    writer.write_record(["run_id", "treatment", "domain", "seed", "k_star", "mean_total_reward"])?;
    for m in manifests {
        writer.write_record([
            m.run_id.clone(),
            m.treatment.clone(),
            m.domain.clone(),
            m.seed.to_string(),
            m.k_star.map(|k| k.to_string()).unwrap_or_default(),
            m.mean_total_reward.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
