//! Correlation between attributions and the consensus training objective.
//!
//! The objective mixes cross-entropy with a disagreement penalty between two
//! differentiable explainers:
//!
//! ```text
//! (1 − λ)·CE + λ·mean_batch[ μ·(1 − spearman) + (1 − μ)·(1 − pearson) ]
//! ```
//!
//! Evaluation-side correlations ([`pearson`], [`spearman`]) report
//! [`Error::UndefinedCorrelation`] for constant input. The graph versions
//! used in training guard their denominators with [`TRAIN_EPS`] instead.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::data::FeatureStats;
use crate::error::{Error, Result};
use crate::explain::{grad_rows, intgrad_rows, Baseline, ExplainerConfig, ExplainerKind};
use crate::nn::{cross_entropy, BoundMlp, LossParts, Objective};
use crate::rank::{hard_rank, soft_rank, soft_rank_rows};

/// Added inside square roots on the training path.
pub const TRAIN_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    Hard,
    /// Soft ranks of the RMS-normalized magnitudes at this regularization.
    Soft(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsensusConfig {
    pub lambda: f64,
    pub mu: f64,
    pub explainer_pair: (ExplainerKind, ExplainerKind),
    pub soft_rank_regularization: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            lambda: 0.5,
            mu: 0.75,
            explainer_pair: (ExplainerKind::Grad, ExplainerKind::IntGrad),
            soft_rank_regularization: 1.0,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(alloc::format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        for kind in [self.explainer_pair.0, self.explainer_pair.1] {
            if !kind.is_differentiable() {
                return Err(Error::NotDifferentiable(kind.name()));
            }
        }
        if !(self.soft_rank_regularization > 0.0 && self.soft_rank_regularization.is_finite()) {
            return Err(Error::InvalidRegularization(self.soft_rank_regularization));
        }
        Ok(())
    }
}

// ---- evaluation path -------------------------------------------------------

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "correlation",
            left: crate::tensor::Shape::new(1, a.len()),
            right: crate::tensor::Shape::new(1, b.len()),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Pearson correlation with centered norms.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut num, mut ssa, mut ssb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        num += da * db;
        ssa += da * da;
        ssb += db * db;
    }
    if ssa == 0.0 || ssb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    // one root keeps integer-valued inputs (ranks) exact
    let product = ssa * ssb;
    let denom = if product.is_normal() {
        libm::sqrt(product)
    } else {
        libm::sqrt(ssa) * libm::sqrt(ssb)
    };
    Ok((num / denom).clamp(-1.0, 1.0))
}

fn rms_normalized(v: &[f64]) -> Vec<f64> {
    let ms = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let s = libm::sqrt(ms + TRAIN_EPS);
    v.iter().map(|x| x / s).collect()
}

/// Pearson correlation of the magnitude ranks.
pub fn spearman(a: &[f64], b: &[f64], mode: RankMode) -> Result<f64> {
    check_pair(a, b)?;
    let (ra, rb) = match mode {
        RankMode::Hard => (hard_rank(a)?, hard_rank(b)?),
        RankMode::Soft(reg) => (
            soft_rank(&rms_normalized(a), reg)?,
            soft_rank(&rms_normalized(b), reg)?,
        ),
    };
    pearson(&ra, &rb)
}

// ---- training path ---------------------------------------------------------

/// Row-wise Pearson correlation of two `rows × n` attribution matrices,
/// returned as `rows × 1`.
pub fn pearson_rows<'g>(a: Var<'g>, b: Var<'g>) -> Result<Var<'g>> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "pearson_rows",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let ca = a.sub(a.mean_cols())?;
    let cb = b.sub(b.mean_cols())?;
    let num = ca.mul(cb)?.sum_cols();
    let na = ca.mul(ca)?.sum_cols().offset(TRAIN_EPS).sqrt();
    let nb = cb.mul(cb)?.sum_cols().offset(TRAIN_EPS).sqrt();
    num.div(na.mul(nb)?)
}

fn rms_normalized_rows<'g>(v: Var<'g>) -> Result<Var<'g>> {
    v.div(v.mul(v)?.mean_cols().offset(TRAIN_EPS).sqrt())
}

/// Row-wise soft Spearman correlation, `rows × 1`.
pub fn soft_spearman_rows<'g>(a: Var<'g>, b: Var<'g>, regularization: f64) -> Result<Var<'g>> {
    let ra = soft_rank_rows(rms_normalized_rows(a)?, regularization)?;
    let rb = soft_rank_rows(rms_normalized_rows(b)?, regularization)?;
    pearson_rows(ra, rb)
}

/// Attributions of `kind` for every row of `x` as a differentiable graph
/// value.
pub fn attribution_rows<'g>(
    kind: ExplainerKind,
    model: &BoundMlp<'g>,
    x: Var<'g>,
    logits: Var<'g>,
    targets: &[usize],
    config: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<Var<'g>> {
    match kind {
        ExplainerKind::Grad => grad_rows(logits, x, targets, true),
        ExplainerKind::GradInput => grad_rows(logits, x, targets, true)?.mul(x),
        ExplainerKind::IntGrad => {
            let d = x.shape().cols;
            let baseline = match &config.intgrad_baseline {
                Baseline::Zero => vec![0.0; d],
                Baseline::TrainMean => stats.mean.clone(),
                Baseline::Point(p) => p.clone(),
            };
            intgrad_rows(
                x.graph(),
                &|v| model.forward(v),
                &x.value(),
                &baseline,
                targets,
                config.intgrad_train_steps,
                true,
            )
        }
        other => Err(Error::NotDifferentiable(other.name())),
    }
}

/// How often each correlation pathway has been built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PathwayCounts {
    pub pearson: usize,
    pub spearman: usize,
}

/// The consensus objective. Attributions explain the predicted class.
#[derive(Clone, Debug)]
pub struct PearLoss {
    pub config: ConsensusConfig,
    pub explainers: ExplainerConfig,
    pub stats: FeatureStats,
    pub counts: PathwayCounts,
}

impl PearLoss {
    pub fn new(config: ConsensusConfig, explainers: ExplainerConfig, stats: FeatureStats) -> Result<Self> {
        config.validate()?;
        explainers.validate()?;
        Ok(PearLoss {
            config,
            explainers,
            stats,
            counts: PathwayCounts::default(),
        })
    }
}

impl Objective for PearLoss {
    fn evaluate<'g>(&mut self, model: &BoundMlp<'g>, x: Var<'g>, labels: &[usize]) -> Result<LossParts<'g>> {
        if labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        let logits = model.forward(x)?;
        let task = cross_entropy(logits, labels)?;
        let ConsensusConfig { lambda, mu, .. } = self.config;
        if lambda == 0.0 {
            return Ok(LossParts {
                total: task,
                task: task.item(),
                consensus: None,
                mean_pearson: None,
                mean_spearman: None,
            });
        }

        let targets = logits.value().argmax_rows();
        let (k1, k2) = self.config.explainer_pair;
        let e1 = attribution_rows(k1, model, x, logits, &targets, &self.explainers, &self.stats)?;
        let e2 = attribution_rows(k2, model, x, logits, &targets, &self.explainers, &self.stats)?;

        let mut penalty = None;
        let mut mean_pearson = None;
        let mut mean_spearman = None;
        if mu > 0.0 {
            self.counts.spearman += 1;
            let s = soft_spearman_rows(e1, e2, self.config.soft_rank_regularization)?.mean();
            mean_spearman = Some(s.item());
            penalty = Some(s.neg().offset(1.0).scale(mu));
        }
        if mu < 1.0 {
            self.counts.pearson += 1;
            let p = pearson_rows(e1, e2)?.mean();
            mean_pearson = Some(p.item());
            let term = p.neg().offset(1.0).scale(1.0 - mu);
            penalty = Some(match penalty {
                Some(s) => s.add(term)?,
                None => term,
            });
        }
        let consensus = penalty.expect("mu selects at least one pathway");
        let total = task.scale(1.0 - lambda).add(consensus.scale(lambda))?;
        Ok(LossParts {
            total,
            task: task.item(),
            consensus: Some(consensus.item()),
            mean_pearson,
            mean_spearman,
        })
    }
}
