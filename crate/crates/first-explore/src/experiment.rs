//! End-to-end experiment runs: train when the treatment calls for it, pick
//! k, evaluate, and leave a complete hash-stamped audit trail on disk.
//!
//! Artifact layout inside the output directory:
//!   config.toml        the exact configuration as received
//!   training_log.csv   one row per update (learned treatments only)
//!   checkpoint.fepc    trained parameters (learned treatments only)
//!   k_curve.csv        mean total reward per candidate k (first_explore)
//!   results.csv        per-episode evaluation means
//!   oracle.csv         formula-vs-simulation table (oracle treatment)
//!   manifest.toml      run id, wall time, artifact checksums
//!
//! Every run is a pure function of its config, so repeating one produces
//! byte-identical CSVs; only the manifest's wall time varies.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit::BanditDomain;
use crate::baselines::{random_rollout, thompson_rollout, ucb1_rollout};
use crate::checkpoint::{load_checkpoint_for, save_checkpoint, CheckpointError};
use crate::config::{ConfigError, DomainConfig, ExperimentConfig, Treatment};
use crate::darkroom::DarkroomDomain;
use crate::env::Domain;
use crate::model::params::PolicyParams;
use crate::model::Head;
use crate::oracles::{
    expected_revisit_value, mc_check, myopic_optimal_bound, raymaze_optimal_bound,
    revisit_threshold, sample_myopic_exploration, sample_revisit_value,
    sample_threshold_policy, McReport,
};
use crate::raymaze::RaymazeDomain;
use crate::rng::stream_rng;
use crate::rollout::{run_control_rollout, ActionMode};
use crate::selection::{evaluate, evaluate_policy, select_k_for_policy, EvalSummary, KCurve};
use crate::training::{train, train_control, TrainError, TrainLogRow};

pub const CONFIG_FILE: &str = "config.toml";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.fepc";
pub const K_CURVE_FILE: &str = "k_curve.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Samples per Monte Carlo row in the oracle table.
const ORACLE_MC_SAMPLES: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// Process exit contract: 2 for an invalid config, 3 for training
    /// divergence (partial artifacts are retained), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Train(TrainError::Diverged { .. }) => 3,
            _ => 1,
        }
    }
}

/// One evaluation row: the mean reward of episode `episode_index` across
/// `n_envs` held-out environments, plus the running per-episode cumulative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub treatment: String,
    pub domain: String,
    pub seed: u64,
    pub episode_index: usize,
    pub mean_episode_reward: f64,
    pub mean_cumulative_reward: f64,
    pub n_envs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KCurveRow {
    pub run_id: String,
    pub k: usize,
    pub mean_total_reward: f64,
    pub std_total_reward: f64,
    pub n_envs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainingLogCsvRow {
    run_id: String,
    update: usize,
    loss: f64,
    lr: f64,
    grad_norm: f64,
    mean_return: f64,
    informative_rate: f64,
}

/// One line of the oracle table: a closed-form value, optionally checked
/// against a Monte Carlo estimate of the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub run_id: String,
    pub label: String,
    pub formula: f64,
    pub mc_estimate: Option<f64>,
    pub n_samples: Option<usize>,
    pub tolerance: Option<f64>,
    /// "ok" / "MISMATCH" for checked rows, "analytic" for formula-only rows.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub treatment: String,
    pub domain: String,
    pub seed: u64,
    /// Full digest of the canonical config text; `run_id` is its prefix.
    pub config_sha256: String,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_total_reward: Option<f64>,
    /// File name -> SHA-256, for every artifact the run produced.
    pub artifacts: BTreeMap<String, String>,
}

struct Outcome {
    k_star: Option<usize>,
    mean_total: Option<f64>,
}

/// Runs one experiment into `config.out_dir` and returns its manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Manifest, ExperimentError> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join(CONFIG_FILE), config.to_toml())?;
    let started = Instant::now();
    let outcome = dispatch(config)?;
    finalize_manifest(config, started, outcome.k_star, outcome.mean_total)
}

fn finalize_manifest(
    config: &ExperimentConfig,
    started: Instant,
    k_star: Option<usize>,
    mean_total: Option<f64>,
) -> Result<Manifest, ExperimentError> {
    let manifest = Manifest {
        run_id: config.run_id(),
        treatment: config.treatment.as_str().to_string(),
        domain: config.domain.name().to_string(),
        seed: config.seed,
        config_sha256: hex(&Sha256::digest(config.canonical_toml().as_bytes())),
        wall_seconds: started.elapsed().as_secs_f64(),
        k_star,
        mean_total_reward: mean_total,
        artifacts: hash_artifacts(&config.out_dir)?,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes to TOML");
    fs::write(config.out_dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Reads the config that produced a run directory, re-rooting its outputs
/// there so artifacts regenerate in place even if the directory was moved.
pub fn load_run_config(run_dir: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::load(&run_dir.join(CONFIG_FILE))?;
    cfg.out_dir = run_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

/// Manifest of an existing run directory, when one has been written.
pub fn read_manifest(run_dir: &Path) -> Option<Manifest> {
    let text = fs::read_to_string(run_dir.join(MANIFEST_FILE)).ok()?;
    toml::from_str(&text).ok()
}

/// Dispatches a domain-generic computation to the configured domain type.
trait DomainVisit {
    type Out;
    fn visit<D: Domain>(self, domain: &D) -> Self::Out;
}

fn visit_domain<V: DomainVisit>(domain: &DomainConfig, visitor: V) -> V::Out {
    match *domain {
        DomainConfig::Bandit { arms, pulls, mu1, noise_variance } => {
            visitor.visit(&BanditDomain::new(arms, pulls, mu1, noise_variance))
        }
        DomainConfig::Darkroom { rho, steps, episodes } => {
            visitor.visit(&DarkroomDomain::new(rho, steps, episodes))
        }
        DomainConfig::Raymaze { p_treasure, steps, episodes } => visitor.visit(
            &RaymazeDomain::new(8, p_treasure, 90.0, 15, 30.0, 0.5, steps, episodes),
        ),
    }
}

/// Recomputes the k sweep for an existing first_explore run directory,
/// rewriting `k_curve.csv` and refreshing the manifest.
pub fn run_select_k(run_dir: &Path) -> Result<(Manifest, KCurve), ExperimentError> {
    let cfg = load_run_config(run_dir)?;
    if cfg.treatment != Treatment::FirstExplore {
        return Err(
            ConfigError("k selection applies to the first_explore treatment".into()).into()
        );
    }
    let started = Instant::now();
    let params = load_checkpoint_for(&run_dir.join(CHECKPOINT_FILE), &cfg.model_config())?;

    struct Sweep<'a> {
        params: &'a PolicyParams,
        envs: usize,
        seed: u64,
    }
    impl DomainVisit for Sweep<'_> {
        type Out = KCurve;
        fn visit<D: Domain>(self, domain: &D) -> KCurve {
            select_k_for_policy(self.params, domain, self.envs, self.seed)
        }
    }
    let curve = visit_domain(
        &cfg.domain,
        Sweep { params: &params, envs: cfg.selection.envs, seed: cfg.seed },
    );
    write_k_curve(&cfg, &curve)?;
    let mean_total = read_manifest(run_dir).and_then(|m| m.mean_total_reward);
    let manifest = finalize_manifest(&cfg, started, Some(curve.k_star), mean_total)?;
    Ok((manifest, curve))
}

/// Re-evaluates an existing trained run directory, rewriting `results.csv`.
/// For first_explore, `k` overrides the stored k*; without it the manifest
/// or the k-curve file supplies the value.
pub fn run_eval(
    run_dir: &Path,
    k: Option<usize>,
) -> Result<(Manifest, EvalSummary), ExperimentError> {
    let cfg = load_run_config(run_dir)?;
    let started = Instant::now();
    let model_cfg = cfg.model_config();
    match cfg.treatment {
        Treatment::FirstExplore => {
            let params = load_checkpoint_for(&run_dir.join(CHECKPOINT_FILE), &model_cfg)?;
            let k = match k.or_else(|| read_manifest(run_dir).and_then(|m| m.k_star)) {
                Some(k) => k,
                None => k_star_from_curve_file(run_dir)?,
            };
            let n = cfg.domain.spec().episodes_per_rollout;
            if k > n {
                return Err(ConfigError(format!(
                    "k = {k} exceeds the {n} episodes per rollout"
                ))
                .into());
            }

            struct Eval<'a> {
                params: &'a PolicyParams,
                k: usize,
                envs: usize,
                seed: u64,
            }
            impl DomainVisit for Eval<'_> {
                type Out = EvalSummary;
                fn visit<D: Domain>(self, domain: &D) -> EvalSummary {
                    evaluate_policy(self.params, domain, self.k, self.envs, self.seed)
                }
            }
            let summary = visit_domain(
                &cfg.domain,
                Eval { params: &params, k, envs: cfg.eval.envs, seed: cfg.seed },
            );
            write_results(&cfg, &summary)?;
            let manifest = finalize_manifest(&cfg, started, Some(k), Some(summary.mean_total))?;
            Ok((manifest, summary))
        }
        Treatment::CumulativeControl => {
            if k.is_some() {
                return Err(ConfigError("the control policy has no k to select".into()).into());
            }
            let params = load_checkpoint_for(&run_dir.join(CHECKPOINT_FILE), &model_cfg)?;

            struct Eval<'a> {
                params: &'a PolicyParams,
                envs: usize,
                seed: u64,
            }
            impl DomainVisit for Eval<'_> {
                type Out = EvalSummary;
                fn visit<D: Domain>(self, domain: &D) -> EvalSummary {
                    control_eval(self.params, domain, self.envs, self.seed)
                }
            }
            let summary = visit_domain(
                &cfg.domain,
                Eval { params: &params, envs: cfg.eval.envs, seed: cfg.seed },
            );
            write_results(&cfg, &summary)?;
            let manifest = finalize_manifest(&cfg, started, None, Some(summary.mean_total))?;
            Ok((manifest, summary))
        }
        _ => Err(ConfigError(
            "eval needs a trained run directory (first_explore or cumulative_control)".into(),
        )
        .into()),
    }
}

fn k_star_from_curve_file(run_dir: &Path) -> Result<usize, ExperimentError> {
    let path = run_dir.join(K_CURVE_FILE);
    if !path.exists() {
        return Err(ConfigError(
            "no stored k*; run select-k first or pass an explicit k".into(),
        )
        .into());
    }
    let mut reader = csv::Reader::from_path(&path)?;
    let mut best: Option<(usize, f64)> = None;
    for row in reader.deserialize::<KCurveRow>() {
        let row = row?;
        let better = match best {
            None => true,
            Some((_, mean)) => row.mean_total_reward > mean,
        };
        if better {
            best = Some((row.k, row.mean_total_reward));
        }
    }
    match best {
        Some((k, _)) => Ok(k),
        None => Err(ConfigError("k-curve file is empty".into()).into()),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    match (cfg.treatment, &cfg.domain) {
        (Treatment::Oracle, _) => run_oracle(cfg),
        (
            Treatment::Ucb1 | Treatment::Ts,
            &DomainConfig::Bandit { arms, pulls, mu1, noise_variance },
        ) => run_bandit_baseline(cfg, arms, pulls, mu1, noise_variance),
        // validate() already rejected ucb1/ts off the bandit domain
        (Treatment::Ucb1 | Treatment::Ts, _) => unreachable!(),
        (_, &DomainConfig::Bandit { arms, pulls, mu1, noise_variance }) => {
            run_generic(cfg, &BanditDomain::new(arms, pulls, mu1, noise_variance))
        }
        (_, &DomainConfig::Darkroom { rho, steps, episodes }) => {
            run_generic(cfg, &DarkroomDomain::new(rho, steps, episodes))
        }
        (_, &DomainConfig::Raymaze { p_treasure, steps, episodes }) => run_generic(
            cfg,
            &RaymazeDomain::new(8, p_treasure, 90.0, 15, 30.0, 0.5, steps, episodes),
        ),
    }
}

fn run_generic<D: Domain>(cfg: &ExperimentConfig, domain: &D) -> Result<Outcome, ExperimentError> {
    match cfg.treatment {
        Treatment::FirstExplore => run_first_explore(cfg, domain),
        Treatment::CumulativeControl => run_control(cfg, domain),
        Treatment::Random => {
            let spec = domain.spec();
            let summary = evaluate(spec.episodes_per_rollout, cfg.eval.envs, |i| {
                let mut env = domain.sample(&mut stream_rng(cfg.seed, "eval.env", i as u64));
                let mut rng = stream_rng(cfg.seed, "eval.noise", i as u64);
                random_rollout(&mut env, spec, &mut rng)
            });
            write_results(cfg, &summary)?;
            Ok(Outcome { k_star: None, mean_total: Some(summary.mean_total) })
        }
        // handled before generic dispatch
        Treatment::Ucb1 | Treatment::Ts | Treatment::Oracle => unreachable!(),
    }
}

fn run_first_explore<D: Domain>(
    cfg: &ExperimentConfig,
    domain: &D,
) -> Result<Outcome, ExperimentError> {
    let model_cfg = cfg.model_config();
    let mut log = TrainingLog::create(cfg)?;
    let trained = train(domain, model_cfg.clone(), &cfg.train, cfg.seed, |row| log.push(row));
    log.finish()?;
    let params = trained?;
    let checkpoint_path = cfg.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&params, &checkpoint_path)?;
    // Evaluate exactly what is on disk: selection and evaluation run on the
    // reloaded (f32-rounded) parameters, so a later `eval` of the saved
    // checkpoint reproduces these numbers bit for bit.
    let params = load_checkpoint_for(&checkpoint_path, &model_cfg)?;
    let curve = select_k_for_policy(&params, domain, cfg.selection.envs, cfg.seed);
    write_k_curve(cfg, &curve)?;
    let summary = evaluate_policy(&params, domain, curve.k_star, cfg.eval.envs, cfg.seed);
    write_results(cfg, &summary)?;
    Ok(Outcome { k_star: Some(curve.k_star), mean_total: Some(summary.mean_total) })
}

fn run_control<D: Domain>(cfg: &ExperimentConfig, domain: &D) -> Result<Outcome, ExperimentError> {
    let model_cfg = cfg.model_config();
    let mut log = TrainingLog::create(cfg)?;
    let trained =
        train_control(domain, model_cfg.clone(), &cfg.train, cfg.seed, |row| log.push(row));
    log.finish()?;
    let params = trained?;
    let checkpoint_path = cfg.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&params, &checkpoint_path)?;
    let params = load_checkpoint_for(&checkpoint_path, &model_cfg)?;
    let summary = control_eval(&params, domain, cfg.eval.envs, cfg.seed);
    write_results(cfg, &summary)?;
    Ok(Outcome { k_star: None, mean_total: Some(summary.mean_total) })
}

/// Greedy evaluation of a cumulative-control policy: every episode in
/// context, exploit head throughout.
fn control_eval<D: Domain>(
    params: &PolicyParams,
    domain: &D,
    envs: usize,
    seed: u64,
) -> EvalSummary {
    let spec = domain.spec();
    evaluate(spec.episodes_per_rollout, envs, |i| {
        let mut env = domain.sample(&mut stream_rng(seed, "eval.env", i as u64));
        let mut rng = stream_rng(seed, "eval.noise", i as u64);
        run_control_rollout(params, domain, &mut env, Head::Exploit, ActionMode::Greedy, &mut rng, false)
            .expect("evaluation rollout fits the context")
            .returns
    })
}

fn run_bandit_baseline(
    cfg: &ExperimentConfig,
    arms: usize,
    pulls: usize,
    mu1: f64,
    noise_variance: f64,
) -> Result<Outcome, ExperimentError> {
    let domain = BanditDomain::new(arms, pulls, mu1, noise_variance);
    let use_ucb = cfg.treatment == Treatment::Ucb1;
    let summary = evaluate(pulls, cfg.eval.envs, |i| {
        let env = domain.sample(&mut stream_rng(cfg.seed, "eval.env", i as u64));
        let mut rng = stream_rng(cfg.seed, "eval.noise", i as u64);
        if use_ucb {
            ucb1_rollout(&env, pulls, &mut rng)
        } else {
            thompson_rollout(&env, pulls, mu1, noise_variance, &mut rng)
        }
    });
    write_results(cfg, &summary)?;
    Ok(Outcome { k_star: None, mean_total: Some(summary.mean_total) })
}

fn run_oracle(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let rows = oracle_rows(cfg);
    write_csv(&cfg.out_dir.join(ORACLE_FILE), &rows)?;
    Ok(Outcome { k_star: None, mean_total: None })
}

fn checked_row(run_id: &str, report: &McReport) -> OracleRow {
    OracleRow {
        run_id: run_id.to_string(),
        label: report.label.clone(),
        formula: report.expected,
        mc_estimate: Some(report.estimate),
        n_samples: Some(report.n_samples),
        tolerance: Some(report.tol),
        status: if report.passed() { "ok" } else { "MISMATCH" }.to_string(),
    }
}

fn analytic_row(run_id: &str, label: &str, value: f64) -> OracleRow {
    OracleRow {
        run_id: run_id.to_string(),
        label: label.to_string(),
        formula: value,
        mc_estimate: None,
        n_samples: None,
        tolerance: None,
        status: "analytic".to_string(),
    }
}

/// Closed-form values for the configured domain, each checked by simulation
/// where a sampler of the same quantity exists.
pub fn oracle_rows(cfg: &ExperimentConfig) -> Vec<OracleRow> {
    let id = cfg.run_id();
    let n = ORACLE_MC_SAMPLES;
    match cfg.domain {
        DomainConfig::Bandit { arms, pulls, mu1, .. } => vec![
            analytic_row(&id, "fixed_arm_total", pulls as f64 * mu1),
            analytic_row(&id, "random_policy_expected_total", pulls as f64 * mu1 / arms as f64),
        ],
        DomainConfig::Darkroom { rho, episodes, .. } => {
            // The first visit happens in the exploration episode; each of the
            // remaining episodes can revisit.
            let revisits = (episodes - 1) as f64;
            let threshold = revisit_threshold(rho);
            vec![
                checked_row(
                    &id,
                    &mc_check(
                        "expected_revisit_value",
                        expected_revisit_value(rho, revisits),
                        n,
                        0.02,
                        cfg.seed,
                        |rng| sample_revisit_value(rho, revisits, rng),
                    ),
                ),
                analytic_row(&id, "revisit_threshold", threshold),
                checked_row(
                    &id,
                    &mc_check(
                        "revisit_value_at_threshold",
                        0.0,
                        n,
                        0.02,
                        cfg.seed,
                        |rng| sample_revisit_value(rho, threshold, rng),
                    ),
                ),
                checked_row(
                    &id,
                    &mc_check(
                        "myopic_optimal_bound",
                        myopic_optimal_bound(rho, revisits),
                        n,
                        0.02,
                        cfg.seed,
                        |rng| sample_myopic_exploration(rho, revisits, rng),
                    ),
                ),
            ]
        }
        DomainConfig::Raymaze { p_treasure, episodes, .. } => vec![checked_row(
            &id,
            &mc_check(
                "raymaze_optimal_bound",
                raymaze_optimal_bound(p_treasure, episodes, 3),
                n,
                0.01,
                cfg.seed,
                |rng| sample_threshold_policy(p_treasure, episodes, 3, rng),
            ),
        )],
    }
}

/// Expands an evaluation summary into per-episode rows with a running
/// cumulative column.
pub fn result_rows(cfg: &ExperimentConfig, summary: &EvalSummary) -> Vec<ResultRow> {
    let run_id = cfg.run_id();
    let mut rows = Vec::with_capacity(summary.per_episode_mean.len());
    let mut cumulative = 0.0;
    for (episode_index, &mean) in summary.per_episode_mean.iter().enumerate() {
        cumulative += mean;
        rows.push(ResultRow {
            run_id: run_id.clone(),
            treatment: cfg.treatment.as_str().to_string(),
            domain: cfg.domain.name().to_string(),
            seed: cfg.seed,
            episode_index,
            mean_episode_reward: mean,
            mean_cumulative_reward: cumulative,
            n_envs: summary.n_envs,
        });
    }
    rows
}

fn write_results(cfg: &ExperimentConfig, summary: &EvalSummary) -> Result<(), ExperimentError> {
    write_csv(&cfg.out_dir.join(RESULTS_FILE), &result_rows(cfg, summary))
}

fn write_k_curve(cfg: &ExperimentConfig, curve: &KCurve) -> Result<(), ExperimentError> {
    let run_id = cfg.run_id();
    let rows: Vec<KCurveRow> = curve
        .points
        .iter()
        .map(|p| KCurveRow {
            run_id: run_id.clone(),
            k: p.k,
            mean_total_reward: p.mean,
            std_total_reward: p.std,
            n_envs: p.n_envs,
        })
        .collect();
    write_csv(&cfg.out_dir.join(K_CURVE_FILE), &rows)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Streaming training-log writer. Rows land on disk as they arrive so a
/// diverged run still leaves its loss history behind.
struct TrainingLog {
    writer: csv::Writer<fs::File>,
    run_id: String,
    deferred: Option<csv::Error>,
}

impl TrainingLog {
    fn create(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        Ok(TrainingLog {
            writer: csv::Writer::from_path(cfg.out_dir.join(TRAINING_LOG_FILE))?,
            run_id: cfg.run_id(),
            deferred: None,
        })
    }

    fn push(&mut self, row: &TrainLogRow) {
        if self.deferred.is_some() {
            return;
        }
        let csv_row = TrainingLogCsvRow {
            run_id: self.run_id.clone(),
            update: row.update,
            loss: row.loss,
            lr: row.lr,
            grad_norm: row.grad_norm,
            mean_return: row.mean_return,
            informative_rate: row.informative_rate,
        };
        if let Err(e) = self.writer.serialize(&csv_row).and_then(|()| Ok(self.writer.flush()?)) {
            self.deferred = Some(e);
        }
    }

    fn finish(mut self) -> Result<(), ExperimentError> {
        if let Some(e) = self.deferred.take() {
            return Err(e.into());
        }
        self.writer.flush()?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_artifacts(out_dir: &Path) -> Result<BTreeMap<String, String>, ExperimentError> {
    let mut artifacts = BTreeMap::new();
    for name in [
        CONFIG_FILE,
        TRAINING_LOG_FILE,
        CHECKPOINT_FILE,
        K_CURVE_FILE,
        RESULTS_FILE,
        ORACLE_FILE,
    ] {
        let path = out_dir.join(name);
        if path.exists() {
            artifacts.insert(name.to_string(), hex(&Sha256::digest(fs::read(&path)?)));
        }
    }
    Ok(artifacts)
}
