use std::path::PathBuf;

use pear_core::explain::{point_seed, ExplainerConfig, ExplainerKind};
use pear_core::metrics::Metric;
use pear_core::nn::{Activation, ModelKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PearError, Result};

/// Named CSV datasets and their train-split sizes. The file is expected at
/// `<data_dir>/<name>.csv`.
pub const NAMED_DATASETS: [(&str, usize); 3] = [
    ("bank_marketing", 7933),
    ("california_housing", 15475),
    ("electricity", 28855),
];

pub const SYNTHETIC: &str = "synthetic";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// `synthetic`, one of [`NAMED_DATASETS`], or any name with `csv_path`.
    pub dataset: String,
    pub data_dir: PathBuf,
    pub csv_path: Option<PathBuf>,
    pub label_column: String,
    /// Defaults to the named split size, 15000 for synthetic data, or 75%.
    pub train_count: Option<usize>,
    pub synthetic_samples: usize,
    pub junk_features: bool,

    pub model: ModelKind,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lambda: f64,
    pub mu: f64,
    /// Defaults by model kind.
    pub learning_rate: Option<f64>,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Defaults to 30 for λ ∈ {0, 0.25} and 50 otherwise (10 for linear).
    pub epochs: Option<usize>,
    pub explainer_pair: (ExplainerKind, ExplainerKind),
    pub soft_rank_regularization: f64,

    pub seed: u64,
    pub trials: usize,

    pub explainers: ExplainerConfig,
    /// Explain only the first this-many test points; all when unset.
    pub eval_points: Option<usize>,
    pub metric: Metric,
    pub k: usize,
    /// Pair reported by the sweeps.
    pub agreement_pair: (ExplainerKind, ExplainerKind),
    pub matrix_explainers: Vec<ExplainerKind>,
    pub lambdas: Vec<f64>,
    pub decays: Vec<f64>,
    pub mus: Vec<f64>,
    pub planes: usize,
    pub grid_resolution: usize,
    /// Use this model instead of training one (explain, matrix, junk,
    /// planes, linfit).
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: SYNTHETIC.to_string(),
            data_dir: PathBuf::from("data"),
            csv_path: None,
            label_column: "label".to_string(),
            train_count: None,
            synthetic_samples: 20_000,
            junk_features: false,
            model: ModelKind::Mlp,
            hidden: vec![100, 100, 100],
            activation: Activation::Relu,
            lambda: 0.0,
            mu: 0.75,
            learning_rate: None,
            weight_decay: 0.0002,
            batch_size: 64,
            epochs: None,
            explainer_pair: (ExplainerKind::Grad, ExplainerKind::IntGrad),
            soft_rank_regularization: 1.0,
            seed: 0,
            trials: 3,
            explainers: ExplainerConfig::default(),
            eval_points: None,
            metric: Metric::PairwiseRankAgreement,
            k: 5,
            agreement_pair: (ExplainerKind::Lime, ExplainerKind::Shap),
            matrix_explainers: ExplainerKind::ALL.to_vec(),
            lambdas: vec![0.0, 0.25, 0.5, 0.75],
            decays: vec![0.0002, 0.002, 0.02, 0.2],
            mus: vec![0.0, 0.75, 1.0],
            planes: 10,
            grid_resolution: 51,
            checkpoint: None,
        }
    }
}

/// Every seed a run uses. Data seeds depend only on the base seed, so all
/// trials see the same split; model seeds also depend on the trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
    pub split: u64,
    pub junk: u64,
    pub anchor: u64,
    pub init: u64,
    pub shuffle: u64,
    pub explainer: u64,
}

impl Seeds {
    pub fn for_trial(base: u64, trial: usize) -> Self {
        let stream = |tag: usize| point_seed(base, tag);
        let per_trial = |tag: usize| point_seed(stream(tag), trial);
        Seeds {
            data: stream(1),
            split: stream(2),
            junk: stream(3),
            anchor: stream(4),
            init: per_trial(5),
            shuffle: per_trial(6),
            explainer: per_trial(7),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub seed: Option<u64>,
    pub dataset: Option<String>,
}

impl TrainConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
        if let Some(v) = o.mu {
            self.mu = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.dataset {
            self.dataset = v.clone();
        }
    }

    pub fn seeds(&self, trial: usize) -> Seeds {
        Seeds::for_trial(self.seed, trial)
    }

    pub fn epochs_for(&self, lambda: f64) -> usize {
        self.epochs.unwrap_or_else(|| self.model.default_epochs(lambda))
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
            .unwrap_or_else(|| self.model.default_learning_rate())
    }

    pub fn named_train_count(&self) -> Option<usize> {
        NAMED_DATASETS
            .iter()
            .find(|(n, _)| *n == self.dataset)
            .map(|(_, c)| *c)
    }

    pub fn csv_file(&self) -> PathBuf {
        self.csv_path
            .clone()
            .unwrap_or_else(|| self.data_dir.join(format!("{}.csv", self.dataset)))
    }

    /// Hex SHA-256 of the config's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Lists every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.lambda) {
            p.push(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !unit(self.mu) {
            p.push(format!("mu {} outside [0, 1]", self.mu));
        }
        if let Some(v) = self.lambdas.iter().find(|v| !unit(**v)) {
            p.push(format!("lambdas entry {v} outside [0, 1]"));
        }
        if let Some(v) = self.mus.iter().find(|v| !unit(**v)) {
            p.push(format!("mus entry {v} outside [0, 1]"));
        }
        if let Some(v) = self.decays.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            p.push(format!("decays entry {v} is not a non-negative number"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            p.push("weight_decay must be non-negative".into());
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                p.push("learning_rate must be positive".into());
            }
        }
        for kind in [self.explainer_pair.0, self.explainer_pair.1] {
            if !kind.is_differentiable() {
                p.push(format!("explainer_pair member {kind} is not differentiable"));
            }
        }
        if !(self.soft_rank_regularization > 0.0 && self.soft_rank_regularization.is_finite()) {
            p.push("soft_rank_regularization must be positive".into());
        }
        if self.model == ModelKind::Mlp && self.hidden.contains(&0) {
            p.push("hidden widths must be positive".into());
        }
        for (name, v) in [
            ("trials", self.trials),
            ("batch_size", self.batch_size),
            ("k", self.k),
            ("planes", self.planes),
            ("synthetic_samples", self.synthetic_samples),
        ] {
            if v == 0 {
                p.push(format!("{name} must be positive"));
            }
        }
        if self.epochs == Some(0) {
            p.push("epochs must be positive".into());
        }
        if self.eval_points == Some(0) {
            p.push("eval_points must be positive".into());
        }
        if self.grid_resolution < 2 {
            p.push("grid_resolution must be at least 2".into());
        }
        if self.matrix_explainers.is_empty() {
            p.push("matrix_explainers is empty".into());
        }
        if self.dataset != SYNTHETIC && self.named_train_count().is_none() && self.csv_path.is_none() {
            p.push(format!("unknown dataset {:?} and no csv_path", self.dataset));
        }
        if let Err(e) = self.explainers.validate() {
            p.push(e.to_string());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(PearError::Config(p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn problems_are_listed_together() {
        let c = TrainConfig {
            lambda: 2.0,
            mu: -1.0,
            trials: 0,
            explainer_pair: (ExplainerKind::Lime, ExplainerKind::Grad),
            ..TrainConfig::default()
        };
        match c.validate() {
            Err(PearError::Config(p)) => assert_eq!(p.len(), 4, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seeds_split_data_and_model_streams() {
        let a = Seeds::for_trial(3, 0);
        let b = Seeds::for_trial(3, 1);
        assert_eq!(
            (a.data, a.split, a.junk, a.anchor),
            (b.data, b.split, b.junk, b.anchor)
        );
        assert_ne!(a.init, b.init);
        assert_ne!(a.shuffle, b.shuffle);
        assert_ne!(Seeds::for_trial(4, 0).split, a.split);
    }

    #[test]
    fn config_round_trips_and_hash_tracks_content() {
        let c = TrainConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), c);
        let partial: TrainConfig = serde_json::from_str(r#"{"lambda": 0.5}"#).unwrap();
        assert_eq!(partial.lambda, 0.5);
        assert_ne!(partial.hash(), c.hash());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lamda": 0.5}"#).is_err());
    }

    #[test]
    fn epoch_rule_and_overrides() {
        let mut c = TrainConfig::default();
        assert_eq!(c.epochs_for(0.25), 30);
        assert_eq!(c.epochs_for(0.5), 50);
        c.apply(&Overrides {
            lambda: Some(0.25),
            dataset: Some("electricity".into()),
            ..Overrides::default()
        });
        assert_eq!((c.lambda, c.dataset.as_str()), (0.25, "electricity"));
        assert_eq!(c.named_train_count(), Some(28855));
    }
}
