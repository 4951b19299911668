//! Experiment runners behind the CLI verbs. Each runner writes its reports
//! into the output directory and returns the same data for callers that
//! want it in memory.

use std::path::{Path, PathBuf};

use pear_core::consensus::{ConsensusConfig, PathwayCounts, PearLoss};
use pear_core::data::{synthetic, Dataset, FeatureStats, Provenance, SyntheticSpec};
use pear_core::explain::{
    explain, point_seed, predicted_targets, Attribution, ExplainerConfig, ExplainerKind,
};
use pear_core::metrics::{disagreement_matrix, mean_stderr, top_k, DisagreementMatrix, Metric};
use pear_core::nn::{accuracy, train, EpochRecord, History, Mlp, MlpConfig, ModelKind, TrainSettings};
use pear_core::probe::{linear_fit_mae, LinearFitSummary, DEFAULT_EXTENT};
use pear_core::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Seeds, TrainConfig, SYNTHETIC};
use crate::error::{PearError, Result};
use crate::io::{load_csv, read_json, write_csv, write_json, write_text};

/// Draws used for the Monte Carlo junk chance baseline.
pub const CHANCE_DRAWS: usize = 200_000;

/// Loads or generates the configured data, splits it, standardizes with
/// train statistics, and appends junk columns if requested.
pub fn prepare_data(cfg: &TrainConfig) -> Result<Dataset> {
    let seeds = cfg.seeds(0);
    let raw = if cfg.dataset == SYNTHETIC && cfg.csv_path.is_none() {
        synthetic(&SyntheticSpec::benchmark(cfg.synthetic_samples, seeds.data))?
    } else {
        load_csv(&cfg.csv_file(), &cfg.label_column)?
    };
    let n = raw.len();
    let train_count = cfg
        .train_count
        .or_else(|| cfg.named_train_count())
        .unwrap_or(n * 3 / 4);
    if train_count == 0 || train_count >= n {
        return Err(PearError::Config(vec![format!(
            "train_count {train_count} leaves no train or test rows in {n}"
        )]));
    }
    let mut ds = raw.split(train_count, seeds.split)?.standardize()?;
    if cfg.junk_features {
        ds = ds.add_junk_features(seeds.junk)?;
    }
    Ok(ds)
}

/// The first `eval_points` test rows, or all of them.
pub fn eval_points(cfg: &TrainConfig, ds: &Dataset) -> Tensor {
    let x = ds.test_x();
    match cfg.eval_points {
        Some(n) if n < x.rows() => x.select_rows(&(0..n).collect::<Vec<_>>()),
        _ => x,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub trial: usize,
    pub seeds: Seeds,
    pub lambda: f64,
    pub mu: f64,
    pub weight_decay: f64,
    pub feature_names: Vec<String>,
    pub model: Mlp,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub trial: usize,
    pub seeds: Seeds,
    pub lambda: f64,
    pub mu: f64,
    pub weight_decay: f64,
    pub model: Mlp,
    pub history: History,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub counts: PathwayCounts,
}

pub fn model_config(cfg: &TrainConfig, input_dim: usize, seed: u64) -> MlpConfig {
    match cfg.model {
        ModelKind::Linear => MlpConfig::linear(input_dim, seed),
        ModelKind::Mlp => MlpConfig {
            hidden: cfg.hidden.clone(),
            activation: cfg.activation,
            ..MlpConfig::new(input_dim, seed)
        },
    }
}

/// Trains one model of trial `trial` with the given loss weights.
pub fn train_model(
    cfg: &TrainConfig,
    ds: &Dataset,
    lambda: f64,
    mu: f64,
    weight_decay: f64,
    trial: usize,
) -> Result<TrainedModel> {
    let seeds = cfg.seeds(trial);
    let mut model = Mlp::new(model_config(cfg, ds.feature_count(), seeds.init))?;
    let settings = TrainSettings {
        epochs: cfg.epochs_for(lambda),
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate(),
        weight_decay,
        shuffle_seed: seeds.shuffle,
    };
    let consensus = ConsensusConfig {
        lambda,
        mu,
        explainer_pair: cfg.explainer_pair,
        soft_rank_regularization: cfg.soft_rank_regularization,
    };
    let mut loss = PearLoss::new(
        consensus,
        cfg.explainers.with_seed(seeds.explainer),
        ds.train_stats()?,
    )?;
    let (train_x, train_y) = (ds.train_x(), ds.train_y());
    let (test_x, test_y) = (ds.test_x(), ds.test_y());
    let history = train(
        &mut model,
        &train_x,
        &train_y,
        Some((&test_x, &test_y)),
        &settings,
        &mut loss,
    )?;
    Ok(TrainedModel {
        trial,
        seeds,
        lambda,
        mu,
        weight_decay,
        train_accuracy: accuracy(&model, &train_x, &train_y)?,
        test_accuracy: accuracy(&model, &test_x, &test_y)?,
        model,
        history,
        counts: loss.counts,
    })
}

/// Agreement between two explainers averaged over `points`, explaining the
/// predicted class. `None` if the metric is undefined on every point.
#[allow(clippy::too_many_arguments)]
pub fn pair_agreement(
    model: &Mlp,
    points: &Tensor,
    pair: (ExplainerKind, ExplainerKind),
    metric: Metric,
    k: usize,
    explainers: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<Option<f64>> {
    let targets = predicted_targets(model, points)?;
    let m = disagreement_matrix(
        model,
        &[pair.0, pair.1],
        points,
        &targets,
        metric,
        k,
        explainers,
        stats,
    )?;
    Ok(m.entry(pair.0, pair.1))
}

/// Fraction of attributions with at least one junk feature in the top `k`.
pub fn junk_frequency(attributions: &[Attribution], junk: &[bool], k: usize) -> Result<f64> {
    if attributions.is_empty() {
        return Err(pear_core::Error::EmptyInput.into());
    }
    let mut hits = 0usize;
    for a in attributions {
        if top_k(&a.scores, k)?.iter().any(|&i| junk[i]) {
            hits += 1;
        }
    }
    Ok(hits as f64 / attributions.len() as f64)
}

/// `1 − C(real, k) / C(real + junk, k)`: the chance that `k` features drawn
/// uniformly include a junk one.
pub fn hypergeometric_chance(real: usize, junk: usize, k: usize) -> f64 {
    if k > real {
        return 1.0;
    }
    let none = (0..k).fold(1.0, |acc, i| acc * (real - i) as f64 / (real + junk - i) as f64);
    1.0 - none
}

/// The same probability estimated by drawing `k`-subsets.
pub fn monte_carlo_chance(real: usize, junk: usize, k: usize, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = real + junk;
    let k = k.min(total);
    let hits = (0..draws)
        .filter(|_| {
            rand::seq::index::sample(&mut rng, total, k)
                .iter()
                .any(|i| i >= real)
        })
        .count();
    hits as f64 / draws as f64
}

fn summary(values: &[f64]) -> (Option<f64>, Option<f64>) {
    match mean_stderr(values) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    }
}

#[derive(Serialize)]
struct EpochRow<'a> {
    trial: usize,
    epoch: usize,
    task_loss: f64,
    consensus_loss: Option<f64>,
    train_accuracy: f64,
    test_accuracy: Option<f64>,
    config_hash: &'a str,
    seed: u64,
    init_seed: u64,
    shuffle_seed: u64,
}

#[derive(Serialize)]
struct StepRow<'a> {
    trial: usize,
    step: u64,
    task: f64,
    consensus: Option<f64>,
    mean_pearson: Option<f64>,
    mean_spearman: Option<f64>,
    config_hash: &'a str,
    seed: u64,
}

/// Result of `train`: what was trained and where the reports went.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: TrainConfig,
    pub config_hash: String,
    pub seeds: Vec<Seeds>,
    pub checkpoints: Vec<String>,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub test_accuracy_mean: Option<f64>,
    pub test_accuracy_std_err: Option<f64>,
    pub final_consensus_loss: Vec<Option<f64>>,
    pub reports: Vec<String>,
}

#[derive(Serialize)]
struct ProvenanceReport<'a> {
    config_hash: &'a str,
    dataset: &'a str,
    feature_names: &'a [String],
    junk_mask: &'a [bool],
    provenance: &'a Provenance,
}

/// One experiment: a validated config, its hash, and an output directory.
pub struct Experiment {
    pub config: TrainConfig,
    pub hash: String,
    pub out: PathBuf,
    reports: Vec<String>,
}

impl Experiment {
    pub fn new(config: TrainConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Experiment {
            config,
            hash,
            out: out.into(),
            reports: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn record(&mut self, name: &str) {
        if !self.reports.iter().any(|r| r == name) {
            self.reports.push(name.to_string());
        }
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        write_csv(&self.path(name), rows)?;
        self.record(name);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.path(name), value)?;
        self.record(name);
        Ok(())
    }

    /// Report files written so far, relative to the output directory.
    pub fn reports(&self) -> &[String] {
        &self.reports
    }

    /// Prepares the data and writes the resolved config and the data
    /// provenance next to the reports.
    pub fn data(&mut self) -> Result<Dataset> {
        let ds = prepare_data(&self.config)?;
        let config = self.config.clone();
        self.json("config.json", &config)?;
        let report = ProvenanceReport {
            config_hash: &self.hash,
            dataset: &self.config.dataset,
            feature_names: ds.feature_names(),
            junk_mask: ds.junk_mask(),
            provenance: ds.provenance(),
        };
        write_json(&self.path("provenance.json"), &report)?;
        self.record("provenance.json");
        Ok(ds)
    }

    fn explainer_config(&self, seeds: &Seeds) -> ExplainerConfig {
        self.config.explainers.with_seed(seeds.explainer)
    }

    fn log(&self, msg: &str) {
        eprintln!("[{}] {msg}", &self.hash[..8]);
    }

    fn train_logged(
        &self,
        ds: &Dataset,
        lambda: f64,
        mu: f64,
        wd: f64,
        trial: usize,
    ) -> Result<TrainedModel> {
        self.log(&format!("training trial {trial} lambda={lambda} mu={mu} wd={wd}"));
        let run = train_model(&self.config, ds, lambda, mu, wd, trial)?;
        self.log(&format!("trial {trial} test accuracy {:.4}", run.test_accuracy));
        Ok(run)
    }

    fn no_checkpoint(&self, verb: &str) -> Result<()> {
        match &self.config.checkpoint {
            Some(path) => Err(PearError::Config(vec![format!(
                "{verb} trains its own models and cannot use checkpoint {}",
                path.display()
            )])),
            None => Ok(()),
        }
    }

    /// The models the analysis verbs work on: the checkpoint if one is
    /// configured, otherwise up to `max` freshly trained trials.
    fn models(&self, ds: &Dataset, max: usize) -> Result<Vec<(usize, Seeds, Mlp)>> {
        if let Some(path) = &self.config.checkpoint {
            let ckpt: Checkpoint = read_json(path)?;
            if ckpt.model.config().input_dim != ds.feature_count() {
                return Err(PearError::Config(vec![format!(
                    "checkpoint {} expects {} features but the data has {}",
                    path.display(),
                    ckpt.model.config().input_dim,
                    ds.feature_count()
                )]));
            }
            return Ok(vec![(ckpt.trial, ckpt.seeds, ckpt.model)]);
        }
        let c = &self.config;
        (0..c.trials.min(max))
            .map(|t| {
                self.train_logged(ds, c.lambda, c.mu, c.weight_decay, t)
                    .map(|r| (r.trial, r.seeds, r.model))
            })
            .collect()
    }

    /// `train`: one checkpoint and history per trial plus `run.json`.
    pub fn run_train(&mut self) -> Result<RunArtifact> {
        self.no_checkpoint("train")?;
        let ds = self.data()?;
        let c = self.config.clone();
        let mut runs = Vec::new();
        let mut epochs = Vec::new();
        let mut steps = Vec::new();
        let mut checkpoints = Vec::new();
        for t in 0..c.trials {
            let run = self.train_logged(&ds, c.lambda, c.mu, c.weight_decay, t)?;
            for e in &run.history.epochs {
                let EpochRecord {
                    epoch,
                    task_loss,
                    consensus_loss,
                    train_accuracy,
                    test_accuracy,
                } = e.clone();
                epochs.push(EpochRow {
                    trial: t,
                    epoch,
                    task_loss,
                    consensus_loss,
                    train_accuracy,
                    test_accuracy,
                    config_hash: &self.hash,
                    seed: c.seed,
                    init_seed: run.seeds.init,
                    shuffle_seed: run.seeds.shuffle,
                });
            }
            for s in &run.history.steps {
                steps.push(StepRow {
                    trial: t,
                    step: s.step,
                    task: s.task,
                    consensus: s.consensus,
                    mean_pearson: s.mean_pearson,
                    mean_spearman: s.mean_spearman,
                    config_hash: &self.hash,
                    seed: c.seed,
                });
            }
            let name = format!("model_trial{t}.json");
            let ckpt = Checkpoint {
                config_hash: self.hash.clone(),
                trial: t,
                seeds: run.seeds,
                lambda: run.lambda,
                mu: run.mu,
                weight_decay: run.weight_decay,
                feature_names: ds.feature_names().to_vec(),
                model: run.model.clone(),
            };
            write_json(&self.path(&name), &ckpt)?;
            checkpoints.push(name);
            runs.push(run);
        }
        write_csv(&self.path("history.csv"), &epochs)?;
        write_csv(&self.path("steps.csv"), &steps)?;
        for name in checkpoints
            .iter()
            .chain(["history.csv".to_string(), "steps.csv".to_string()].iter())
        {
            self.record(name);
        }
        let test: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
        let (test_accuracy_mean, test_accuracy_std_err) = summary(&test);
        self.record("run.json");
        let artifact = RunArtifact {
            config: c,
            config_hash: self.hash.clone(),
            seeds: runs.iter().map(|r| r.seeds).collect(),
            checkpoints,
            train_accuracy: runs.iter().map(|r| r.train_accuracy).collect(),
            test_accuracy: test,
            test_accuracy_mean,
            test_accuracy_std_err,
            final_consensus_loss: runs
                .iter()
                .map(|r| r.history.epochs.last().and_then(|e| e.consensus_loss))
                .collect(),
            reports: self.reports.clone(),
        };
        write_json(&self.path("run.json"), &artifact)?;
        Ok(artifact)
    }

    /// `explain`: attributions of every matrix explainer on the evaluation
    /// points, in long format.
    pub fn run_explain(&mut self) -> Result<Vec<Attribution>> {
        #[derive(Serialize)]
        struct Row<'a> {
            point: usize,
            explainer: &'static str,
            target: usize,
            feature: &'a str,
            score: f64,
            config_hash: &'a str,
            seed: u64,
            explainer_seed: u64,
        }
        let ds = self.data()?;
        let (_, seeds, model) = self.models(&ds, 1)?.remove(0);
        let points = eval_points(&self.config, &ds);
        let targets = predicted_targets(&model, &points)?;
        let cfg = self.explainer_config(&seeds);
        let stats = ds.train_stats()?;
        let mut all = Vec::new();
        for &kind in &self.config.matrix_explainers {
            all.extend(explain(kind, &model, &points, &targets, &cfg, &stats)?);
        }
        let n = points.rows();
        let rows: Vec<Row> = all
            .iter()
            .enumerate()
            .flat_map(|(idx, a)| {
                let names = ds.feature_names();
                let hash = self.hash.as_str();
                let seed = self.config.seed;
                a.scores.iter().enumerate().map(move |(f, &score)| Row {
                    point: idx % n,
                    explainer: a.explainer.name(),
                    target: a.target,
                    feature: &names[f],
                    score,
                    config_hash: hash,
                    seed,
                    explainer_seed: seeds.explainer,
                })
            })
            .collect();
        write_csv(&self.path("attributions.csv"), &rows)?;
        self.record("attributions.csv");
        Ok(all)
    }

    /// `matrix`: one disagreement matrix per model.
    pub fn run_matrix(&mut self) -> Result<Vec<DisagreementMatrix>> {
        #[derive(Serialize)]
        struct Row<'a> {
            trial: usize,
            metric: &'static str,
            k: Option<usize>,
            explainer_a: &'static str,
            explainer_b: &'static str,
            mean: Option<f64>,
            std_err: Option<f64>,
            count: usize,
            config_hash: &'a str,
            seed: u64,
        }
        let ds = self.data()?;
        let points = eval_points(&self.config, &ds);
        let stats = ds.train_stats()?;
        let mut matrices = Vec::new();
        let mut rows = Vec::new();
        for (trial, seeds, model) in self.models(&ds, usize::MAX)? {
            let targets = predicted_targets(&model, &points)?;
            let m = disagreement_matrix(
                &model,
                &self.config.matrix_explainers,
                &points,
                &targets,
                self.config.metric,
                self.config.k,
                &self.explainer_config(&seeds),
                &stats,
            )?;
            for (i, a) in m.explainers.iter().enumerate() {
                for (j, b) in m.explainers.iter().enumerate() {
                    rows.push(Row {
                        trial,
                        metric: m.metric.name(),
                        k: m.k,
                        explainer_a: a.name(),
                        explainer_b: b.name(),
                        mean: m.means[i][j],
                        std_err: m.std_errs[i][j],
                        count: m.counts[i][j],
                        config_hash: &self.hash,
                        seed: self.config.seed,
                    });
                }
            }
            matrices.push(m);
        }
        write_csv(&self.path("matrix.csv"), &rows)?;
        self.record("matrix.csv");
        self.json("matrix.json", &matrices)?;
        Ok(matrices)
    }

    fn agreement(&self, model: &Mlp, ds: &Dataset, seeds: &Seeds) -> Result<Option<f64>> {
        pair_agreement(
            model,
            &eval_points(&self.config, ds),
            self.config.agreement_pair,
            self.config.metric,
            self.config.k,
            &self.explainer_config(seeds),
            &ds.train_stats()?,
        )
    }

    /// Trains every (λ, μ) combination for every trial and records accuracy,
    /// agreement and pathway counts.
    fn grid(&self, ds: &Dataset, points: &[(f64, f64, f64)]) -> Result<Vec<TrialRow>> {
        let mut rows = Vec::new();
        for &(lambda, mu, wd) in points {
            for t in 0..self.config.trials {
                let run = self.train_logged(ds, lambda, mu, wd, t)?;
                rows.push(TrialRow {
                    lambda,
                    mu,
                    weight_decay: wd,
                    trial: t,
                    test_accuracy: run.test_accuracy,
                    agreement: self.agreement(&run.model, ds, &run.seeds)?,
                    linear_fit_mae: None,
                    pearson_calls: run.counts.pearson,
                    spearman_calls: run.counts.spearman,
                    config_hash: self.hash.clone(),
                    seed: self.config.seed,
                    init_seed: run.seeds.init,
                });
            }
        }
        Ok(rows)
    }

    fn summarize(&self, rows: &[TrialRow]) -> Vec<SummaryRow> {
        let mut keys: Vec<(f64, f64, f64)> = Vec::new();
        for r in rows {
            let key = (r.lambda, r.mu, r.weight_decay);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(lambda, mu, weight_decay)| {
                let group: Vec<&TrialRow> = rows
                    .iter()
                    .filter(|r| (r.lambda, r.mu, r.weight_decay) == (lambda, mu, weight_decay))
                    .collect();
                let acc: Vec<f64> = group.iter().map(|r| r.test_accuracy).collect();
                let agr: Vec<f64> = group.iter().filter_map(|r| r.agreement).collect();
                let mae: Vec<f64> = group.iter().filter_map(|r| r.linear_fit_mae).collect();
                let (accuracy_mean, accuracy_std_err) = summary(&acc);
                let (agreement_mean, agreement_std_err) = summary(&agr);
                let (linear_fit_mae_mean, linear_fit_mae_std_err) = summary(&mae);
                SummaryRow {
                    lambda,
                    mu,
                    weight_decay,
                    trials: group.len(),
                    accuracy_mean,
                    accuracy_std_err,
                    agreement_metric: self.config.metric.name().to_string(),
                    explainer_a: self.config.agreement_pair.0.name().to_string(),
                    explainer_b: self.config.agreement_pair.1.name().to_string(),
                    agreement_mean,
                    agreement_std_err,
                    linear_fit_mae_mean,
                    linear_fit_mae_std_err,
                    pearson_calls: group.iter().map(|r| r.pearson_calls).sum(),
                    spearman_calls: group.iter().map(|r| r.spearman_calls).sum(),
                    config_hash: self.hash.clone(),
                    seed: self.config.seed,
                }
            })
            .collect()
    }

    fn write_sweep(&mut self, stem: &str, rows: &[TrialRow]) -> Result<Vec<SummaryRow>> {
        let summary = self.summarize(rows);
        self.csv(&format!("{stem}_trials.csv"), rows)?;
        self.csv(&format!("{stem}.csv"), &summary)?;
        Ok(summary)
    }

    /// `sweep-lambda`: accuracy and agreement across the λ grid.
    pub fn lambda_sweep(&mut self) -> Result<Vec<SummaryRow>> {
        self.no_checkpoint("sweep-lambda")?;
        let ds = self.data()?;
        let c = &self.config;
        let grid: Vec<_> = c.lambdas.iter().map(|&l| (l, c.mu, c.weight_decay)).collect();
        let rows = self.grid(&ds, &grid)?;
        self.write_sweep("lambda_sweep", &rows)
    }

    /// `ablate-mu`: the λ sweep repeated for each μ.
    pub fn mu_ablation(&mut self) -> Result<Vec<SummaryRow>> {
        self.no_checkpoint("ablate-mu")?;
        let ds = self.data()?;
        let c = &self.config;
        let grid: Vec<_> = c
            .mus
            .iter()
            .flat_map(|&m| c.lambdas.iter().map(move |&l| (l, m, c.weight_decay)))
            .collect();
        let rows = self.grid(&ds, &grid)?;
        self.write_sweep("mu_ablation", &rows)
    }

    /// `sweep-wd`: unregularized (λ = 0) models across the decay grid, with
    /// accuracy, linear-fit MAE on shared planes, and agreement.
    pub fn weight_decay_sweep(&mut self) -> Result<Vec<SummaryRow>> {
        self.no_checkpoint("sweep-wd")?;
        let ds = self.data()?;
        let c = self.config.clone();
        let points = eval_points(&c, &ds);
        let mut rows = Vec::new();
        for &wd in &c.decays {
            for t in 0..c.trials {
                let run = self.train_logged(&ds, 0.0, c.mu, wd, t)?;
                let fit = linear_fit_mae(&run.model, &points, c.planes, run.seeds.anchor, c.grid_resolution)?;
                rows.push(TrialRow {
                    lambda: 0.0,
                    mu: c.mu,
                    weight_decay: wd,
                    trial: t,
                    test_accuracy: run.test_accuracy,
                    agreement: self.agreement(&run.model, &ds, &run.seeds)?,
                    linear_fit_mae: Some(fit.mean_mae),
                    pearson_calls: run.counts.pearson,
                    spearman_calls: run.counts.spearman,
                    config_hash: self.hash.clone(),
                    seed: c.seed,
                    init_seed: run.seeds.init,
                });
            }
        }
        self.write_sweep("wd_sweep", &rows)
    }

    /// `junk`: how often each explainer puts a junk feature in its top k.
    /// Junk columns are added even if the config does not ask for them.
    pub fn junk(&mut self) -> Result<Vec<JunkRow>> {
        self.no_checkpoint("junk")?;
        self.config.junk_features = true;
        self.hash = self.config.hash();
        let ds = self.data()?;
        let c = self.config.clone();
        let points = eval_points(&c, &ds);
        let stats = ds.train_stats()?;
        let junk = ds.junk_mask().to_vec();
        let j = junk.iter().filter(|&&b| b).count();
        let r = junk.len() - j;
        let formula = hypergeometric_chance(r, j, c.k);
        let mc = monte_carlo_chance(r, j, c.k, CHANCE_DRAWS, point_seed(c.seeds(0).junk, 1));
        let mut per_trial = Vec::new();
        for (trial, seeds, model) in self.models(&ds, usize::MAX)? {
            let targets = predicted_targets(&model, &points)?;
            let cfg = self.explainer_config(&seeds);
            for &kind in &c.matrix_explainers {
                let attrs = explain(kind, &model, &points, &targets, &cfg, &stats)?;
                per_trial.push((trial, kind, junk_frequency(&attrs, &junk, c.k)?));
            }
        }
        #[derive(Serialize)]
        struct TrialJunk<'a> {
            trial: usize,
            explainer: &'static str,
            lambda: f64,
            k: usize,
            frequency: f64,
            config_hash: &'a str,
            seed: u64,
        }
        let trial_rows: Vec<TrialJunk> = per_trial
            .iter()
            .map(|&(trial, kind, frequency)| TrialJunk {
                trial,
                explainer: kind.name(),
                lambda: c.lambda,
                k: c.k,
                frequency,
                config_hash: &self.hash,
                seed: c.seed,
            })
            .collect();
        write_csv(&self.path("junk_trials.csv"), &trial_rows)?;
        self.record("junk_trials.csv");
        let rows: Vec<JunkRow> = c
            .matrix_explainers
            .iter()
            .map(|&kind| {
                let f: Vec<f64> = per_trial.iter().filter(|p| p.1 == kind).map(|p| p.2).collect();
                let (frequency_mean, frequency_std_err) = summary(&f);
                JunkRow {
                    explainer: kind.name().to_string(),
                    lambda: c.lambda,
                    k: c.k,
                    real_features: r,
                    junk_features: j,
                    frequency_mean,
                    frequency_std_err,
                    chance_hypergeometric: formula,
                    chance_monte_carlo: mc,
                    config_hash: self.hash.clone(),
                    seed: c.seed,
                }
            })
            .collect();
        self.csv("junk.csv", &rows)?;
        Ok(rows)
    }

    /// `planes`: logit surfaces over planes through test points.
    pub fn planes(&mut self) -> Result<LinearFitSummary> {
        #[derive(Serialize)]
        struct PlaneRow<'a> {
            plane: usize,
            anchor_1: usize,
            anchor_2: usize,
            anchor_3: usize,
            fit_u: f64,
            fit_v: f64,
            fit_const: f64,
            mae: f64,
            config_hash: &'a str,
            seed: u64,
            anchor_seed: u64,
        }
        let ds = self.data()?;
        let c = self.config.clone();
        let (_, seeds, model) = self.models(&ds, 1)?.remove(0);
        let points = eval_points(&c, &ds);
        let fit = linear_fit_mae(&model, &points, c.planes, seeds.anchor, c.grid_resolution)?;
        let test = ds.test_indices();
        for (i, p) in fit.planes.iter().enumerate() {
            let name = format!("plane_{i}.csv");
            write_text(&self.path(&name), &p.to_csv())?;
            self.record(&name);
        }
        let rows: Vec<PlaneRow> = fit
            .planes
            .iter()
            .enumerate()
            .map(|(i, p)| PlaneRow {
                plane: i,
                anchor_1: test[p.anchors[0]],
                anchor_2: test[p.anchors[1]],
                anchor_3: test[p.anchors[2]],
                fit_u: p.fit[0],
                fit_v: p.fit[1],
                fit_const: p.fit[2],
                mae: p.mae,
                config_hash: &self.hash,
                seed: c.seed,
                anchor_seed: seeds.anchor,
            })
            .collect();
        write_csv(&self.path("planes.csv"), &rows)?;
        self.record("planes.csv");
        Ok(fit)
    }

    /// `linfit`: mean linear-fit MAE per model over shared planes.
    pub fn linfit(&mut self) -> Result<Vec<LinfitRow>> {
        let ds = self.data()?;
        let c = self.config.clone();
        let points = eval_points(&c, &ds);
        let mut rows = Vec::new();
        for (trial, seeds, model) in self.models(&ds, usize::MAX)? {
            let fit = linear_fit_mae(&model, &points, c.planes, seeds.anchor, c.grid_resolution)?;
            rows.push(LinfitRow {
                trial,
                lambda: c.lambda,
                weight_decay: c.weight_decay,
                planes: c.planes,
                resolution: c.grid_resolution,
                extent_low: DEFAULT_EXTENT.0,
                extent_high: DEFAULT_EXTENT.1,
                mean_mae: fit.mean_mae,
                std_err: fit.std_err,
                config_hash: self.hash.clone(),
                seed: c.seed,
                anchor_seed: seeds.anchor,
            });
        }
        self.csv("linfit.csv", &rows)?;
        Ok(rows)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub lambda: f64,
    pub mu: f64,
    pub weight_decay: f64,
    pub trial: usize,
    pub test_accuracy: f64,
    pub agreement: Option<f64>,
    pub linear_fit_mae: Option<f64>,
    pub pearson_calls: usize,
    pub spearman_calls: usize,
    pub config_hash: String,
    pub seed: u64,
    pub init_seed: u64,
}

/// Mean and standard error over trials for one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lambda: f64,
    pub mu: f64,
    pub weight_decay: f64,
    pub trials: usize,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std_err: Option<f64>,
    pub agreement_metric: String,
    pub explainer_a: String,
    pub explainer_b: String,
    pub agreement_mean: Option<f64>,
    pub agreement_std_err: Option<f64>,
    pub linear_fit_mae_mean: Option<f64>,
    pub linear_fit_mae_std_err: Option<f64>,
    pub pearson_calls: usize,
    pub spearman_calls: usize,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunkRow {
    pub explainer: String,
    pub lambda: f64,
    pub k: usize,
    pub real_features: usize,
    pub junk_features: usize,
    pub frequency_mean: Option<f64>,
    pub frequency_std_err: Option<f64>,
    pub chance_hypergeometric: f64,
    pub chance_monte_carlo: f64,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinfitRow {
    pub trial: usize,
    pub lambda: f64,
    pub weight_decay: f64,
    pub planes: usize,
    pub resolution: usize,
    pub extent_low: f64,
    pub extent_high: f64,
    pub mean_mae: f64,
    pub std_err: f64,
    pub config_hash: String,
    pub seed: u64,
    pub anchor_seed: u64,
}

/// Loads a checkpoint written by `train`.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_json(path)
}
