//! Local feature-attribution methods.
//!
//! Gradient methods (Grad, Grad×Input, IntGrad, SmoothGrad) need a
//! [`DiffModel`]; the surrogate methods (LIME, KernelSHAP) only need
//! logits. All methods explain one target class per point and are
//! deterministic given the model, the point, the config and its seed.
//!
//! Grad and IntGrad also have graph-level builders ([`grad_rows`],
//! [`intgrad_rows`]) whose output can be differentiated with respect to
//! model parameters; the consensus loss is built from them.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::data::FeatureStats;
use crate::error::{Error, Result};
use crate::linalg;
use crate::nn::{DiffModel, Model};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    Lime,
    Shap,
    Grad,
    GradInput,
    IntGrad,
    SmoothGrad,
}

impl ExplainerKind {
    pub const ALL: [ExplainerKind; 6] = [
        ExplainerKind::Lime,
        ExplainerKind::Shap,
        ExplainerKind::Grad,
        ExplainerKind::GradInput,
        ExplainerKind::IntGrad,
        ExplainerKind::SmoothGrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExplainerKind::Lime => "lime",
            ExplainerKind::Shap => "shap",
            ExplainerKind::Grad => "grad",
            ExplainerKind::GradInput => "grad_input",
            ExplainerKind::IntGrad => "intgrad",
            ExplainerKind::SmoothGrad => "smoothgrad",
        }
    }

    /// Whether the attribution can be differentiated with respect to model
    /// parameters by the consensus loss.
    pub fn is_differentiable(self) -> bool {
        matches!(
            self,
            ExplainerKind::Grad | ExplainerKind::GradInput | ExplainerKind::IntGrad
        )
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExplainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExplainerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(alloc::format!("unknown explainer {s:?}")))
    }
}

/// Reference point for IntGrad.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Zero,
    TrainMean,
    Point(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    /// Riemann steps for IntGrad at evaluation time.
    pub intgrad_steps: usize,
    /// Riemann steps for IntGrad inside the training loss.
    pub intgrad_train_steps: usize,
    pub intgrad_baseline: Baseline,
    pub smoothgrad_samples: usize,
    pub smoothgrad_sigma: f64,
    pub lime_samples: usize,
    /// Defaults to `0.75 · sqrt(features)` when unset.
    pub lime_kernel_width: Option<f64>,
    pub lime_ridge: f64,
    /// Coalition budget when enumeration is not used.
    pub shap_coalitions: usize,
    /// Enumerate all coalitions up to this many features.
    pub shap_exact_max_features: usize,
    /// Defaults to the training mean when unset.
    pub shap_background: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            intgrad_steps: 50,
            intgrad_train_steps: 8,
            intgrad_baseline: Baseline::Zero,
            smoothgrad_samples: 25,
            smoothgrad_sigma: 0.1,
            lime_samples: 1000,
            lime_kernel_width: None,
            lime_ridge: 1e-3,
            shap_coalitions: 2048,
            shap_exact_max_features: 14,
            shap_background: None,
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("intgrad_steps", self.intgrad_steps),
            ("intgrad_train_steps", self.intgrad_train_steps),
            ("smoothgrad_samples", self.smoothgrad_samples),
            ("lime_samples", self.lime_samples),
            ("shap_coalitions", self.shap_coalitions),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(alloc::format!("{name} must be positive")));
        }
        let positive = [
            ("smoothgrad_sigma", Some(self.smoothgrad_sigma)),
            ("lime_kernel_width", self.lime_kernel_width),
            ("lime_ridge", Some(self.lime_ridge)),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(alloc::format!("{name} must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ExplainerConfig { seed, ..self.clone() }
    }

    fn baseline(&self, stats: &FeatureStats, d: usize) -> Result<Vec<f64>> {
        let b = match &self.intgrad_baseline {
            Baseline::Zero => vec![0.0; d],
            Baseline::TrainMean => stats.mean.clone(),
            Baseline::Point(p) => p.clone(),
        };
        if b.len() != d {
            return Err(Error::ShapeMismatch {
                op: "intgrad baseline",
                left: crate::tensor::Shape::new(1, b.len()),
                right: crate::tensor::Shape::new(1, d),
            });
        }
        Ok(b)
    }
}

/// Seed used for point `index` when explaining a batch.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub scores: Vec<f64>,
    pub explainer: ExplainerKind,
    pub target: usize,
}

/// Predicted class per row.
pub fn predicted_targets(model: &impl Model, points: &Tensor) -> Result<Vec<usize>> {
    Ok(model.logits(points)?.argmax_rows())
}

fn check_point(model: &impl Model, x: &[f64], target: usize) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "explain",
            left: crate::tensor::Shape::new(1, x.len()),
            right: crate::tensor::Shape::new(1, model.input_dim()),
        });
    }
    if target >= model.output_dim() {
        return Err(Error::LabelOutOfRange {
            label: target,
            classes: model.output_dim(),
        });
    }
    Ok(())
}

// ---- graph-level builders -------------------------------------------------

/// Gradient of each row's target logit with respect to that row of `x`.
///
/// `logits` must be the model output for `x`. Rows of an MLP batch do not
/// interact, so one backward pass over the summed target logits yields every
/// per-row gradient.
pub fn grad_rows<'g>(logits: Var<'g>, x: Var<'g>, targets: &[usize], create_graph: bool) -> Result<Var<'g>> {
    let selected = logits.gather_cols(targets)?.sum();
    Ok(x.graph().gradient(selected, &[x], create_graph)?[0])
}

/// IntGrad attributions for each row of `x` with a midpoint Riemann sum of
/// `steps` points on the straight path from `baseline`.
pub fn intgrad_rows<'g>(
    graph: &'g Graph,
    forward: &dyn Fn(Var<'g>) -> Result<Var<'g>>,
    x: &Tensor,
    baseline: &[f64],
    targets: &[usize],
    steps: usize,
    create_graph: bool,
) -> Result<Var<'g>> {
    let (rows, d) = (x.rows(), x.cols());
    if baseline.len() != d {
        return Err(Error::ShapeMismatch {
            op: "intgrad baseline",
            left: crate::tensor::Shape::new(1, baseline.len()),
            right: crate::tensor::Shape::new(1, d),
        });
    }
    if steps == 0 {
        return Err(Error::config("intgrad steps must be positive"));
    }
    // step-major layout: rows k·B .. (k+1)·B hold step k for every point
    let mut path = Vec::with_capacity(steps * rows * d);
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        for row in x.row_iter() {
            path.extend(row.iter().zip(baseline).map(|(xi, bi)| bi + alpha * (xi - bi)));
        }
    }
    let path = graph.leaf(Tensor::new(steps * rows, d, path)?);
    let repeated: Vec<usize> = (0..steps).flat_map(|_| targets.iter().copied()).collect();
    let grads = grad_rows(forward(path)?, path, &repeated, create_graph)?;
    let mut total = grads.slice_rows(0, rows)?;
    for k in 1..steps {
        total = total.add(grads.slice_rows(k * rows, rows)?)?;
    }
    let mut delta = x.clone();
    let cols = d;
    for (j, v) in delta.data_mut().iter_mut().enumerate() {
        *v -= baseline[j % cols];
    }
    total.scale(1.0 / steps as f64).mul(graph.leaf(delta))
}

// ---- gradient methods ------------------------------------------------------

const GRAD_CHUNK_ROWS: usize = 8192;

/// Explains one chunk given as (points, targets, index of the first point).
type ChunkFn<'a> = dyn Fn(&Tensor, &[usize], usize) -> Result<Tensor> + 'a;

fn grad_batch(model: &impl DiffModel, points: &Tensor, targets: &[usize]) -> Result<Tensor> {
    let graph = Graph::new();
    let x = graph.leaf(points.clone());
    let logits = model.forward_var(x)?;
    Ok(grad_rows(logits, x, targets, false)?.value())
}

/// Vanilla gradient of the target logit.
pub fn grad(model: &impl DiffModel, x: &[f64], target: usize) -> Result<Attribution> {
    check_point(model, x, target)?;
    let g = grad_batch(model, &Tensor::row(x), &[target])?;
    Ok(Attribution {
        scores: g.into_data(),
        explainer: ExplainerKind::Grad,
        target,
    })
}

/// Gradient times input.
pub fn grad_input(model: &impl DiffModel, x: &[f64], target: usize) -> Result<Attribution> {
    let mut a = grad(model, x, target)?;
    a.scores.iter_mut().zip(x).for_each(|(s, v)| *s *= v);
    a.explainer = ExplainerKind::GradInput;
    Ok(a)
}

fn intgrad_batch(
    model: &impl DiffModel,
    points: &Tensor,
    targets: &[usize],
    baseline: &[f64],
    steps: usize,
) -> Result<Tensor> {
    let graph = Graph::new();
    Ok(intgrad_rows(
        &graph,
        &|v| model.forward_var(v),
        points,
        baseline,
        targets,
        steps,
        false,
    )?
    .value())
}

/// Integrated gradients along the straight path from the configured
/// baseline, midpoint rule with `config.intgrad_steps` points.
pub fn intgrad(
    model: &impl DiffModel,
    x: &[f64],
    target: usize,
    config: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<Attribution> {
    check_point(model, x, target)?;
    let baseline = config.baseline(stats, x.len())?;
    let a = intgrad_batch(model, &Tensor::row(x), &[target], &baseline, config.intgrad_steps)?;
    Ok(Attribution {
        scores: a.into_data(),
        explainer: ExplainerKind::IntGrad,
        target,
    })
}

fn smoothgrad_batch(
    model: &impl DiffModel,
    points: &Tensor,
    targets: &[usize],
    seeds: &[u64],
    config: &ExplainerConfig,
) -> Result<Tensor> {
    let (rows, d) = (points.rows(), points.cols());
    let n = config.smoothgrad_samples;
    let mut noisy = Vec::with_capacity(rows * n * d);
    let mut repeated = Vec::with_capacity(rows * n);
    for ((row, &t), &seed) in points.row_iter().zip(targets).zip(seeds) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            noisy.extend(row.iter().map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v + config.smoothgrad_sigma * e
            }));
            repeated.push(t);
        }
    }
    let grads = grad_batch(model, &Tensor::new(rows * n, d, noisy)?, &repeated)?;
    let mut out = vec![0.0; rows * d];
    for (r, chunk) in grads.data().chunks_exact(n * d).enumerate() {
        for sample in chunk.chunks_exact(d) {
            for (o, g) in out[r * d..(r + 1) * d].iter_mut().zip(sample) {
                *o += g;
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= n as f64);
    Tensor::new(rows, d, out)
}

/// Mean gradient over Gaussian perturbations of `x`, seeded by `config.seed`.
pub fn smoothgrad(
    model: &impl DiffModel,
    x: &[f64],
    target: usize,
    config: &ExplainerConfig,
) -> Result<Attribution> {
    check_point(model, x, target)?;
    config.validate()?;
    let a = smoothgrad_batch(model, &Tensor::row(x), &[target], &[config.seed], config)?;
    Ok(Attribution {
        scores: a.into_data(),
        explainer: ExplainerKind::SmoothGrad,
        target,
    })
}

// ---- surrogate methods -----------------------------------------------------

/// LIME with Gaussian perturbations: a weighted ridge regression of the
/// target logit on samples `z ~ N(x, diag(std²))`, with weights
/// `exp(−‖(z − x) / std‖² / width²)`. Returns the slope coefficients.
///
/// If the normal equations are singular the ridge is raised tenfold, up to
/// six times, before giving up.
pub fn lime(
    model: &impl Model,
    x: &[f64],
    target: usize,
    config: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<Attribution> {
    lime_fit(model, x, target, config, stats).map(|(a, _)| a)
}

/// [`lime`], also returning the ridge strength that was finally used.
pub fn lime_fit(
    model: &impl Model,
    x: &[f64],
    target: usize,
    config: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<(Attribution, f64)> {
    check_point(model, x, target)?;
    config.validate()?;
    let d = x.len();
    if stats.std.len() != d {
        return Err(Error::config("feature stats do not match the point"));
    }
    let width = config
        .lime_kernel_width
        .unwrap_or_else(|| 0.75 * libm::sqrt(d as f64));
    let n = config.lime_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(n * d);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let mut dist2 = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            samples.push(xj + stats.std[j] * e);
            dist2 += e * e;
        }
        weights.push(libm::exp(-dist2 / (width * width)));
    }
    let samples = Tensor::new(n, d, samples)?;
    let logits = model.logits(&samples)?;
    let y: Vec<f64> = (0..n).map(|i| logits.get(i, target)).collect();

    // intercept column first, unpenalized
    let p = d + 1;
    let mut design = Vec::with_capacity(n * p);
    for row in samples.row_iter() {
        design.push(1.0);
        design.extend_from_slice(row);
    }
    let mut ridge = config.lime_ridge;
    for _ in 0..7 {
        let mut penalty = vec![ridge; p];
        penalty[0] = 0.0;
        match linalg::weighted_least_squares(&design, p, &y, &weights, &penalty) {
            Ok(beta) => {
                let attribution = Attribution {
                    scores: beta[1..].to_vec(),
                    explainer: ExplainerKind::Lime,
                    target,
                };
                return Ok((attribution, ridge));
            }
            Err(Error::Singular) => ridge *= 10.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Singular)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of a coalition of `size` out of `m` features.
pub fn shapley_kernel_weight(m: usize, size: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, size) * size as f64 * (m - size) as f64)
}

/// KernelSHAP for the target logit with features masked to a background
/// point. Attributions sum to `f(x) − f(background)` exactly.
///
/// Every coalition is enumerated when `m ≤ shap_exact_max_features` or
/// `2^m ≤ shap_coalitions`; otherwise `shap_coalitions` coalitions are
/// sampled with sizes drawn in proportion to their total kernel weight.
pub fn kernel_shap(
    model: &impl Model,
    x: &[f64],
    target: usize,
    config: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<Attribution> {
    check_point(model, x, target)?;
    config.validate()?;
    let m = x.len();
    if m < 2 {
        return Err(Error::config("kernel_shap needs at least two features"));
    }
    let background = config
        .shap_background
        .clone()
        .unwrap_or_else(|| stats.mean.clone());
    if background.len() != m {
        return Err(Error::config("background point does not match the point"));
    }

    let exact =
        m <= config.shap_exact_max_features || (m < 63 && (1u64 << m) <= config.shap_coalitions as u64);
    let mut coalitions: Vec<Vec<bool>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    if exact {
        for mask in 1u64..(1u64 << m) - 1 {
            let z: Vec<bool> = (0..m).map(|j| mask >> j & 1 == 1).collect();
            let size = z.iter().filter(|b| **b).count();
            weights.push(shapley_kernel_weight(m, size));
            coalitions.push(z);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let size_mass: Vec<f64> = (1..m)
            .map(|s| (m - 1) as f64 / (s as f64 * (m - s) as f64))
            .collect();
        let total: f64 = size_mass.iter().sum();
        let mut pool: Vec<usize> = (0..m).collect();
        for _ in 0..config.shap_coalitions {
            let mut u = rng.random::<f64>() * total;
            let mut size = m - 1;
            for (i, w) in size_mass.iter().enumerate() {
                if u < *w {
                    size = i + 1;
                    break;
                }
                u -= w;
            }
            for i in 0..size {
                let j = rng.random_range(i..m);
                pool.swap(i, j);
            }
            let mut z = vec![false; m];
            for &j in &pool[..size] {
                z[j] = true;
            }
            coalitions.push(z);
            weights.push(1.0);
        }
    }

    let mut masked = Vec::with_capacity((coalitions.len() + 2) * m);
    masked.extend_from_slice(x);
    masked.extend_from_slice(&background);
    for z in &coalitions {
        masked.extend((0..m).map(|j| if z[j] { x[j] } else { background[j] }));
    }
    let outputs = model.logits(&Tensor::new(coalitions.len() + 2, m, masked)?)?;
    let fx = outputs.get(0, target);
    let fb = outputs.get(1, target);
    let delta = fx - fb;

    // eliminate the last feature through the efficiency constraint
    let p = m - 1;
    let mut design = Vec::with_capacity(coalitions.len() * p);
    let mut y = Vec::with_capacity(coalitions.len());
    for (i, z) in coalitions.iter().enumerate() {
        let last = if z[m - 1] { 1.0 } else { 0.0 };
        design.extend((0..p).map(|j| if z[j] { 1.0 - last } else { -last }));
        y.push(outputs.get(i + 2, target) - fb - last * delta);
    }
    let head = linalg::weighted_least_squares(&design, p, &y, &weights, &vec![0.0; p])?;
    let mut scores = head.clone();
    scores.push(delta - head.iter().sum::<f64>());
    Ok(Attribution {
        scores,
        explainer: ExplainerKind::Shap,
        target,
    })
}

// ---- batch entry point -----------------------------------------------------

/// Explains every row of `points` for the given targets.
///
/// Point `i` is explained with seed [`point_seed`]`(config.seed, i)`, so a
/// point's attribution depends on its index but not on the other points in
/// the batch.
pub fn explain<M: DiffModel>(
    kind: ExplainerKind,
    model: &M,
    points: &Tensor,
    targets: &[usize],
    config: &ExplainerConfig,
    stats: &FeatureStats,
) -> Result<Vec<Attribution>> {
    config.validate()?;
    if targets.len() != points.rows() {
        return Err(Error::ShapeMismatch {
            op: "explain",
            left: points.shape(),
            right: crate::tensor::Shape::new(targets.len(), 1),
        });
    }
    for (i, (row, &t)) in points.row_iter().zip(targets).enumerate() {
        check_point(model, row, t).map_err(|e| Error::Point {
            point: i,
            source: Box::new(e),
        })?;
    }
    let rows = points.rows();
    let d = points.cols();
    let wrap = |kind_rows: Tensor, kind: ExplainerKind| -> Vec<Attribution> {
        kind_rows
            .row_iter()
            .zip(targets)
            .map(|(s, &t)| Attribution {
                scores: s.to_vec(),
                explainer: kind,
                target: t,
            })
            .collect()
    };
    let chunked = |per_point_rows: usize, f: &ChunkFn| -> Result<Tensor> {
        let chunk = (GRAD_CHUNK_ROWS / per_point_rows.max(1)).max(1);
        let mut out = Vec::with_capacity(rows * d);
        let mut start = 0;
        while start < rows {
            let end = (start + chunk).min(rows);
            let idx: Vec<usize> = (start..end).collect();
            let part = f(&points.select_rows(&idx), &targets[start..end], start)?;
            out.extend_from_slice(part.data());
            start = end;
        }
        Tensor::new(rows, d, out)
    };

    match kind {
        ExplainerKind::Grad => Ok(wrap(chunked(1, &|p, t, _| grad_batch(model, p, t))?, kind)),
        ExplainerKind::GradInput => {
            let mut g = chunked(1, &|p, t, _| grad_batch(model, p, t))?;
            for (v, x) in g.data_mut().iter_mut().zip(points.data()) {
                *v *= x;
            }
            Ok(wrap(g, kind))
        }
        ExplainerKind::IntGrad => {
            let baseline = config.baseline(stats, d)?;
            let steps = config.intgrad_steps;
            Ok(wrap(
                chunked(steps, &|p, t, _| intgrad_batch(model, p, t, &baseline, steps))?,
                kind,
            ))
        }
        ExplainerKind::SmoothGrad => Ok(wrap(
            chunked(config.smoothgrad_samples, &|p, t, start| {
                let seeds: Vec<u64> = (start..start + p.rows())
                    .map(|i| point_seed(config.seed, i))
                    .collect();
                smoothgrad_batch(model, p, t, &seeds, config)
            })?,
            kind,
        )),
        ExplainerKind::Lime | ExplainerKind::Shap => points
            .row_iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (row, &t))| {
                let cfg = config.with_seed(point_seed(config.seed, i));
                let result = if kind == ExplainerKind::Lime {
                    lime(model, row, t, &cfg, stats)
                } else {
                    kernel_shap(model, row, t, &cfg, stats)
                };
                result.map_err(|e| Error::Point {
                    point: i,
                    source: Box::new(e),
                })
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, Mlp, MlpConfig};

    fn linear_model(w0: &[f64], w1: &[f64], b: [f64; 2]) -> Mlp {
        let d = w0.len();
        let data: Vec<f64> = (0..d).flat_map(|j| [w0[j], w1[j]]).collect();
        Mlp::from_layers(
            MlpConfig::linear(d, 0),
            vec![Layer {
                weight: Tensor::new(d, 2, data).unwrap(),
                bias: Tensor::row(&b),
            }],
        )
        .unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in ExplainerKind::ALL {
            assert_eq!(k.name().parse::<ExplainerKind>().unwrap(), k);
        }
        assert!("xgboost".parse::<ExplainerKind>().is_err());
    }

    #[test]
    fn linear_model_gradients_are_the_weights() {
        let w = [0.5, -1.5, 2.0];
        let m = linear_model(&w, &[0.0; 3], [0.1, 0.0]);
        let x = [0.3, 0.7, -1.1];
        assert_eq!(grad(&m, &x, 0).unwrap().scores, w.to_vec());
        let gi = grad_input(&m, &x, 0).unwrap().scores;
        for j in 0..3 {
            assert_eq!(gi[j], w[j] * x[j]);
        }
        assert_eq!(grad_input(&m, &[0.0; 3], 0).unwrap().scores, vec![0.0; 3]);
    }

    #[test]
    fn intgrad_on_linear_model_is_weight_times_input() {
        let w = [0.5, -1.5, 2.0];
        let m = linear_model(&w, &[1.0; 3], [0.0, 0.0]);
        let x = [0.3, 0.7, -1.1];
        let stats = FeatureStats::standard(3);
        for steps in [1, 3, 50] {
            let cfg = ExplainerConfig {
                intgrad_steps: steps,
                ..ExplainerConfig::default()
            };
            let a = intgrad(&m, &x, 0, &cfg, &stats).unwrap();
            for j in 0..3 {
                assert!((a.scores[j] - w[j] * x[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn intgrad_at_baseline_is_zero_and_checks_baseline_shape() {
        let m = Mlp::new(MlpConfig::new(3, 2)).unwrap();
        let stats = FeatureStats::standard(3);
        let a = intgrad(&m, &[0.0; 3], 1, &ExplainerConfig::default(), &stats).unwrap();
        assert_eq!(a.scores, vec![0.0; 3]);
        let bad = ExplainerConfig {
            intgrad_baseline: Baseline::Point(vec![0.0; 2]),
            ..ExplainerConfig::default()
        };
        assert!(matches!(
            intgrad(&m, &[1.0; 3], 1, &bad, &stats),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn smoothgrad_on_linear_model_is_the_weights() {
        let w = [0.5, -1.5, 2.0];
        let m = linear_model(&w, &[0.0; 3], [0.0, 0.0]);
        let cfg = ExplainerConfig {
            smoothgrad_sigma: 3.0,
            smoothgrad_samples: 7,
            ..ExplainerConfig::default()
        };
        let a = smoothgrad(&m, &[1.0, 2.0, 3.0], 0, &cfg).unwrap();
        for j in 0..3 {
            assert!((a.scores[j] - w[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothgrad_small_sigma_recovers_grad_and_is_deterministic() {
        let m = Mlp::new(MlpConfig::new(4, 8)).unwrap();
        let x = [0.2, -0.4, 1.0, 0.3];
        let cfg = ExplainerConfig {
            smoothgrad_sigma: 1e-9,
            ..ExplainerConfig::default()
        };
        let sg = smoothgrad(&m, &x, 0, &cfg).unwrap();
        let g = grad(&m, &x, 0).unwrap();
        for (a, b) in sg.scores.iter().zip(&g.scores) {
            assert!((a - b).abs() < 1e-6);
        }
        let cfg = ExplainerConfig::default();
        assert_eq!(
            smoothgrad(&m, &x, 0, &cfg).unwrap(),
            smoothgrad(&m, &x, 0, &cfg).unwrap()
        );
    }

    #[test]
    fn lime_recovers_linear_weights() {
        let w = [0.8, -0.3, 1.7, 0.05];
        let m = linear_model(&w, &[0.0; 4], [0.4, 0.0]);
        let cfg = ExplainerConfig {
            lime_ridge: 1e-9,
            lime_samples: 4000,
            ..ExplainerConfig::default()
        };
        let stats = FeatureStats::standard(4);
        let a = lime(&m, &[0.5, 1.0, -0.5, 2.0], 0, &cfg, &stats).unwrap();
        for (got, want) in a.scores.iter().zip(w) {
            assert!((got - want).abs() <= 0.01 * w.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }

    #[test]
    fn lime_on_constant_model_is_zero() {
        let m = linear_model(&[0.0; 3], &[0.0; 3], [2.5, -1.0]);
        let stats = FeatureStats::standard(3);
        let a = lime(&m, &[1.0, 2.0, 3.0], 0, &ExplainerConfig::default(), &stats).unwrap();
        assert!(a.scores.iter().all(|s| s.abs() < 1e-9));
    }

    #[test]
    fn lime_is_seed_deterministic() {
        let m = Mlp::new(MlpConfig::new(3, 1)).unwrap();
        let stats = FeatureStats::standard(3);
        let cfg = ExplainerConfig::default();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(lime(&m, &x, 1, &cfg, &stats), lime(&m, &x, 1, &cfg, &stats));
        assert_ne!(
            lime(&m, &x, 1, &cfg, &stats).unwrap(),
            lime(&m, &x, 1, &cfg.with_seed(5), &stats).unwrap()
        );
    }

    #[test]
    fn shap_at_background_is_zero_and_needs_two_features() {
        let m = Mlp::new(MlpConfig::new(3, 1)).unwrap();
        let stats = FeatureStats::standard(3);
        let a = kernel_shap(&m, &[0.0; 3], 0, &ExplainerConfig::default(), &stats).unwrap();
        assert!(a.scores.iter().all(|s| s.abs() < 1e-12));
        let one = Mlp::new(MlpConfig::new(1, 1)).unwrap();
        assert!(kernel_shap(
            &one,
            &[1.0],
            0,
            &ExplainerConfig::default(),
            &FeatureStats::standard(1)
        )
        .is_err());
    }

    #[test]
    fn sampled_shap_satisfies_efficiency() {
        let mut c = MlpConfig::new(16, 4);
        c.hidden = vec![8];
        let m = Mlp::new(c).unwrap();
        let stats = FeatureStats::standard(16);
        let cfg = ExplainerConfig {
            shap_coalitions: 512,
            ..ExplainerConfig::default()
        };
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = kernel_shap(&m, &x, 1, &cfg, &stats).unwrap();
        let logits = m
            .logits(&Tensor::from_rows(&[x.clone(), vec![0.0; 16]]).unwrap())
            .unwrap();
        let delta = logits.get(0, 1) - logits.get(1, 1);
        assert!((a.scores.iter().sum::<f64>() - delta).abs() < 1e-9);
    }

    #[test]
    fn batch_matches_single_point_calls() {
        let m = Mlp::new(MlpConfig::new(3, 6)).unwrap();
        let stats = FeatureStats::standard(3);
        let cfg = ExplainerConfig {
            lime_samples: 200,
            intgrad_steps: 10,
            ..ExplainerConfig::default()
        };
        let points = Tensor::from_rows(&[[0.1, 0.5, -0.2], [1.0, -1.0, 0.3]]).unwrap();
        let targets = predicted_targets(&m, &points).unwrap();
        for kind in ExplainerKind::ALL {
            let batch = explain(kind, &m, &points, &targets, &cfg, &stats).unwrap();
            for (i, a) in batch.iter().enumerate() {
                let x = points.row_slice(i);
                let c = cfg.with_seed(point_seed(cfg.seed, i));
                let single = match kind {
                    ExplainerKind::Grad => grad(&m, x, targets[i]),
                    ExplainerKind::GradInput => grad_input(&m, x, targets[i]),
                    ExplainerKind::IntGrad => intgrad(&m, x, targets[i], &c, &stats),
                    ExplainerKind::SmoothGrad => smoothgrad(&m, x, targets[i], &c),
                    ExplainerKind::Lime => lime(&m, x, targets[i], &c, &stats),
                    ExplainerKind::Shap => kernel_shap(&m, x, targets[i], &c, &stats),
                }
                .unwrap();
                for (p, q) in a.scores.iter().zip(&single.scores) {
                    assert!((p - q).abs() < 1e-12, "{kind}");
                }
            }
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ExplainerConfig {
            smoothgrad_sigma: 0.0,
            ..ExplainerConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExplainerConfig {
            lime_samples: 0,
            ..ExplainerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bad_target_is_rejected() {
        let m = Mlp::new(MlpConfig::new(2, 0)).unwrap();
        assert!(matches!(
            grad(&m, &[0.0, 0.0], 2),
            Err(Error::LabelOutOfRange { .. })
        ));
    }
}
