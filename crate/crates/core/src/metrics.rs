//! Agreement metrics between two attributions of the same point, and
//! explainer-by-explainer matrices of their averages.
//!
//! The four top-k metrics count features that lie in *both* top-k sets and
//! satisfy the metric's condition, divided by `k`. Top-k is by magnitude
//! with ties at the boundary going to the lower feature index.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::{spearman, RankMode};
use crate::data::FeatureStats;
use crate::error::{Error, Result};
use crate::explain::{explain, Attribution, ExplainerConfig, ExplainerKind};
use crate::nn::DiffModel;
use crate::rank::hard_rank;
use crate::tensor::Tensor;

/// The default `k` for top-k metrics.
pub const DEFAULT_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FeatureAgreement,
    RankAgreement,
    SignAgreement,
    SignedRankAgreement,
    RankCorrelation,
    PairwiseRankAgreement,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::FeatureAgreement,
        Metric::RankAgreement,
        Metric::SignAgreement,
        Metric::SignedRankAgreement,
        Metric::RankCorrelation,
        Metric::PairwiseRankAgreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::FeatureAgreement => "feature_agreement",
            Metric::RankAgreement => "rank_agreement",
            Metric::SignAgreement => "sign_agreement",
            Metric::SignedRankAgreement => "signed_rank_agreement",
            Metric::RankCorrelation => "rank_correlation",
            Metric::PairwiseRankAgreement => "pairwise_rank_agreement",
        }
    }

    pub fn uses_k(self) -> bool {
        !matches!(self, Metric::RankCorrelation | Metric::PairwiseRankAgreement)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(alloc::format!("unknown metric {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementScore {
    pub metric: Metric,
    pub k: Option<usize>,
    pub value: f64,
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "agreement",
            left: crate::tensor::Shape::new(1, a.len()),
            right: crate::tensor::Shape::new(1, b.len()),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Indices of the `k` largest magnitudes, most important first.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::TopKOutOfRange { k, n: scores.len() });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // stable, so equal magnitudes keep index order
    idx.sort_by(|&i, &j| {
        libm::fabs(scores[j])
            .partial_cmp(&libm::fabs(scores[i]))
            .unwrap_or(Ordering::Equal)
    });
    idx.truncate(k);
    Ok(idx)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn top_k_fraction(a: &[f64], b: &[f64], k: usize, same_rank: bool, same_sign: bool) -> Result<f64> {
    check_lengths(a, b)?;
    let ta = top_k(a, k)?;
    let tb = top_k(b, k)?;
    let (ra, rb) = if same_rank {
        (hard_rank(a)?, hard_rank(b)?)
    } else {
        (Vec::new(), Vec::new())
    };
    let count = ta
        .iter()
        .filter(|s| tb.contains(s))
        .filter(|&&s| !same_rank || ra[s] == rb[s])
        .filter(|&&s| !same_sign || sign(a[s]) == sign(b[s]))
        .count();
    Ok(count as f64 / k as f64)
}

pub fn feature_agreement(a: &[f64], b: &[f64], k: usize) -> Result<f64> {
    top_k_fraction(a, b, k, false, false)
}

pub fn rank_agreement(a: &[f64], b: &[f64], k: usize) -> Result<f64> {
    top_k_fraction(a, b, k, true, false)
}

pub fn sign_agreement(a: &[f64], b: &[f64], k: usize) -> Result<f64> {
    top_k_fraction(a, b, k, false, true)
}

pub fn signed_rank_agreement(a: &[f64], b: &[f64], k: usize) -> Result<f64> {
    top_k_fraction(a, b, k, true, true)
}

/// Spearman correlation of the magnitude ranks over all features.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    spearman(a, b, RankMode::Hard)
}

/// Fraction of feature pairs whose magnitude order (including ties) is the
/// same under both attributions.
pub fn pairwise_rank_agreement(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len();
    if n < 2 {
        return Err(Error::EmptyInput);
    }
    let order = |v: &[f64], i: usize, j: usize| {
        libm::fabs(v[i])
            .partial_cmp(&libm::fabs(v[j]))
            .unwrap_or(Ordering::Equal)
    };
    let mut agree = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if order(a, i, j) == order(b, i, j) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

/// Evaluates `metric`. `k` is ignored by the metrics that use all features.
pub fn agreement(metric: Metric, a: &[f64], b: &[f64], k: usize) -> Result<AgreementScore> {
    let value = match metric {
        Metric::FeatureAgreement => feature_agreement(a, b, k)?,
        Metric::RankAgreement => rank_agreement(a, b, k)?,
        Metric::SignAgreement => sign_agreement(a, b, k)?,
        Metric::SignedRankAgreement => signed_rank_agreement(a, b, k)?,
        Metric::RankCorrelation => rank_correlation(a, b)?,
        Metric::PairwiseRankAgreement => pairwise_rank_agreement(a, b)?,
    };
    Ok(AgreementScore {
        metric,
        k: metric.uses_k().then_some(k),
        value,
    })
}

/// Mean and standard error of a sample; `None` when it is empty.
pub fn mean_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, libm::sqrt(var / n)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisagreementMatrix {
    pub metric: Metric,
    pub k: Option<usize>,
    pub explainers: Vec<ExplainerKind>,
    /// `None` where the metric was undefined at every point.
    pub means: Vec<Vec<Option<f64>>>,
    pub std_errs: Vec<Vec<Option<f64>>>,
    /// Points at which each entry was defined.
    pub counts: Vec<Vec<usize>>,
}

impl DisagreementMatrix {
    /// Averages `metric` over points. `attributions[e][i]` is explainer
    /// `explainers[e]` at point `i`. Points where the metric is undefined
    /// (constant rank vectors) are left out of that entry.
    pub fn from_attributions(
        metric: Metric,
        k: usize,
        explainers: &[ExplainerKind],
        attributions: &[Vec<Attribution>],
    ) -> Result<Self> {
        let e = explainers.len();
        if attributions.len() != e {
            return Err(Error::config("one attribution list per explainer is required"));
        }
        let points = attributions.first().map_or(0, Vec::len);
        if attributions.iter().any(|a| a.len() != points) {
            return Err(Error::config("attribution lists differ in length"));
        }
        let mut means = vec![vec![None; e]; e];
        let mut std_errs = vec![vec![None; e]; e];
        let mut counts = vec![vec![0; e]; e];
        for i in 0..e {
            for j in i..e {
                let mut values = Vec::with_capacity(points);
                for p in 0..points {
                    let a = &attributions[i][p].scores;
                    let b = &attributions[j][p].scores;
                    match agreement(metric, a, b, k) {
                        Ok(s) => values.push(s.value),
                        Err(Error::UndefinedCorrelation) => {}
                        Err(err) => {
                            return Err(Error::Point {
                                point: p,
                                source: alloc::boxed::Box::new(err),
                            })
                        }
                    }
                }
                let stats = mean_stderr(&values);
                for (r, c) in [(i, j), (j, i)] {
                    means[r][c] = stats.map(|s| s.0);
                    std_errs[r][c] = stats.map(|s| s.1);
                    counts[r][c] = values.len();
                }
            }
        }
        Ok(DisagreementMatrix {
            metric,
            k: metric.uses_k().then_some(k),
            explainers: explainers.to_vec(),
            means,
            std_errs,
            counts,
        })
    }

    pub fn entry(&self, a: ExplainerKind, b: ExplainerKind) -> Option<f64> {
        let i = self.explainers.iter().position(|&e| e == a)?;
        let j = self.explainers.iter().position(|&e| e == b)?;
        self.means[i][j]
    }

    /// One `row,col,mean,std_err,count` line per ordered pair, with header.
    pub fn to_csv(&self) -> String {
        use core::fmt::Write;
        let mut out = String::from("metric,k,explainer_a,explainer_b,mean,std_err,count\n");
        let k = self.k.map(|k| alloc::format!("{k}")).unwrap_or_default();
        let fmt = |v: Option<f64>| v.map(|v| alloc::format!("{v}")).unwrap_or_default();
        for (i, a) in self.explainers.iter().enumerate() {
            for (j, b) in self.explainers.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    self.metric,
                    k,
                    a,
                    b,
                    fmt(self.means[i][j]),
                    fmt(self.std_errs[i][j]),
                    self.counts[i][j]
                );
            }
        }
        out
    }
}

/// Explains `points` with every explainer and averages `metric` over them.
#[allow(clippy::too_many_arguments)]
pub fn disagreement_matrix<M: DiffModel>(
    model: &M,
    explainers: &[ExplainerKind],
    points: &Tensor,
    targets: &[usize],
    metric: Metric,
    k: usize,
    config: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<DisagreementMatrix> {
    let attributions = explainers
        .iter()
        .map(|&kind| explain(kind, model, points, targets, config, stats))
        .collect::<Result<Vec<_>>>()?;
    DisagreementMatrix::from_attributions(metric, k, explainers, &attributions)
}
