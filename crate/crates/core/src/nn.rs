//! Classifiers, task loss, AdamW, and the minibatch training loop.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

/// Whether a run trains the MLP or the linear baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Linear,
}

impl ModelKind {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            ModelKind::Mlp => 0.0005,
            ModelKind::Linear => 0.1,
        }
    }

    /// 30 epochs for λ ∈ {0, 0.25}, 50 otherwise; linear models always 10.
    pub fn default_epochs(self, lambda: f64) -> usize {
        match self {
            ModelKind::Linear => 10,
            ModelKind::Mlp if lambda == 0.0 || lambda == 0.25 => 30,
            ModelKind::Mlp => 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    /// Three hidden layers of 100 units, two classes.
    pub fn new(input_dim: usize, seed: u64) -> Self {
        MlpConfig {
            input_dim,
            hidden: alloc::vec![100, 100, 100],
            output_dim: 2,
            activation: Activation::Relu,
            seed,
        }
    }

    /// A single affine layer: the logistic-regression baseline.
    pub fn linear(input_dim: usize, seed: u64) -> Self {
        MlpConfig {
            hidden: Vec::new(),
            ..MlpConfig::new(input_dim, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if self.output_dim < 2 {
            return Err(Error::config("output_dim must be at least 2"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden.iter().chain(core::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `fan_in × fan_out`
    pub weight: Tensor,
    /// `1 × fan_out`
    pub bias: Tensor,
}

/// Black-box access to a classifier's logits.
pub trait Model {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// `rows × output_dim` logits for a `rows × input_dim` batch.
    fn logits(&self, x: &Tensor) -> Result<Tensor>;
}

/// A classifier whose forward pass can be recorded on a graph.
pub trait DiffModel: Model {
    fn forward_var<'g>(&self, x: Var<'g>) -> Result<Var<'g>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Layer>,
}

impl Mlp {
    /// Weights uniform in `±sqrt(2 / fan_in)`, biases zero, drawn from the
    /// config seed layer by layer in row-major order.
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = libm::sqrt(2.0 / fan_in as f64);
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer {
                    weight: Tensor::new(fan_in, fan_out, data).expect("sized by construction"),
                    bias: Tensor::zeros(1, fan_out),
                }
            })
            .collect();
        Ok(Mlp { config, layers })
    }

    /// Builds a model from explicit layers, checking them against `config`.
    pub fn from_layers(config: MlpConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        let dims = config.layer_dims();
        if dims.len() != layers.len() {
            return Err(Error::config("layer count does not match config"));
        }
        for ((fan_in, fan_out), layer) in dims.iter().zip(&layers) {
            let w = layer.weight.shape();
            let b = layer.bias.shape();
            if w.rows != *fan_in || w.cols != *fan_out || b.rows != 1 || b.cols != *fan_out {
                return Err(Error::ShapeMismatch {
                    op: "layer",
                    left: w,
                    right: crate::tensor::Shape::new(*fan_in, *fan_out),
                });
            }
        }
        Ok(Mlp { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.data().len())
            .sum()
    }

    /// Parameters in a fixed order: weight then bias, layer by layer.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Records the parameters as leaves of `graph`.
    pub fn bind<'g>(&self, graph: &'g Graph) -> BoundMlp<'g> {
        BoundMlp {
            activation: self.config.activation,
            layers: self
                .layers
                .iter()
                .map(|l| (graph.leaf(l.weight.clone()), graph.leaf(l.bias.clone())))
                .collect(),
        }
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.config.input_dim {
            return Err(Error::ShapeMismatch {
                op: "forward",
                left: crate::tensor::Shape::new(1, cols),
                right: crate::tensor::Shape::new(1, self.config.input_dim),
            });
        }
        Ok(())
    }
}

fn activate(activation: Activation, v: f64) -> f64 {
    match activation {
        Activation::Relu => {
            if v > 0.0 {
                v
            } else {
                0.0
            }
        }
        Activation::Tanh => libm::tanh(v),
    }
}

impl Model for Mlp {
    fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.check_width(x.cols())?;
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weight)?;
            let cols = z.cols();
            for (j, v) in z.data_mut().iter_mut().enumerate() {
                *v += layer.bias.data()[j % cols];
                if i != last {
                    *v = activate(self.config.activation, *v);
                }
            }
            h = z;
        }
        Ok(h)
    }
}

impl DiffModel for Mlp {
    fn forward_var<'g>(&self, x: Var<'g>) -> Result<Var<'g>> {
        self.check_width(x.shape().cols)?;
        self.bind(x.graph()).forward(x)
    }
}

/// An [`Mlp`] whose parameters live on a graph.
pub struct BoundMlp<'g> {
    activation: Activation,
    layers: Vec<(Var<'g>, Var<'g>)>,
}

impl<'g> BoundMlp<'g> {
    pub fn forward(&self, x: Var<'g>) -> Result<Var<'g>> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = h.matmul(*w)?.add(*b)?;
            if i != last {
                h = match self.activation {
                    Activation::Relu => h.relu(),
                    Activation::Tanh => h.tanh()?,
                };
            }
        }
        Ok(h)
    }

    /// Same order as [`Mlp::params`].
    pub fn params(&self) -> Vec<Var<'g>> {
        self.layers.iter().flat_map(|(w, b)| [*w, *b]).collect()
    }
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`).
pub fn cross_entropy<'g>(logits: Var<'g>, labels: &[usize]) -> Result<Var<'g>> {
    let shape = logits.shape();
    if labels.len() != shape.rows {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            left: shape,
            right: crate::tensor::Shape::new(labels.len(), 1),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= shape.cols) {
        return Err(Error::LabelOutOfRange {
            label,
            classes: shape.cols,
        });
    }
    Ok(logits.log_softmax().gather_cols(labels)?.mean().neg())
}

/// Fraction of rows whose argmax logit equals the label.
pub fn accuracy(model: &impl Model, x: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pred = model.logits(x)?.argmax_rows();
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::config("gradient count does not match parameter count"));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adamw",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.second = self.first.clone();
        } else if self.first.len() != params.len()
            || self
                .first
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.shape() != p.shape())
        {
            return Err(Error::config("parameters changed shape between steps"));
        }

        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - libm::pow(self.beta1, t as f64);
        let correction2 = 1.0 - libm::pow(self.beta2, t as f64);
        let decay = 1.0 - self.learning_rate * self.weight_decay;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let p = p.data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                let mi = &mut m.data_mut()[i];
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                let vi = &mut v.data_mut()[i];
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = m.data()[i] / correction1;
                let v_hat = v.data()[i] / correction2;
                p[i] = p[i] * decay - self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub shuffle_seed: u64,
}

impl TrainSettings {
    /// Batch 64, weight decay 0.0002, rate and epochs from the model kind.
    pub fn for_kind(kind: ModelKind, lambda: f64, shuffle_seed: u64) -> Self {
        TrainSettings {
            epochs: kind.default_epochs(lambda),
            batch_size: 64,
            learning_rate: kind.default_learning_rate(),
            weight_decay: 0.0002,
            shuffle_seed,
        }
    }
}

/// What one minibatch contributes: the total to minimize plus values for
/// the step log.
pub struct LossParts<'g> {
    pub total: Var<'g>,
    pub task: f64,
    pub consensus: Option<f64>,
    pub mean_pearson: Option<f64>,
    pub mean_spearman: Option<f64>,
}

/// A training objective evaluated on one minibatch.
pub trait Objective {
    fn evaluate<'g>(&mut self, model: &BoundMlp<'g>, x: Var<'g>, labels: &[usize]) -> Result<LossParts<'g>>;
}

/// Plain cross-entropy.
#[derive(Clone, Copy, Debug, Default)]
pub struct TaskLoss;

impl Objective for TaskLoss {
    fn evaluate<'g>(&mut self, model: &BoundMlp<'g>, x: Var<'g>, labels: &[usize]) -> Result<LossParts<'g>> {
        let total = cross_entropy(model.forward(x)?, labels)?;
        Ok(LossParts {
            total,
            task: total.item(),
            consensus: None,
            mean_pearson: None,
            mean_spearman: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub task: f64,
    pub consensus: Option<f64>,
    pub mean_pearson: Option<f64>,
    pub mean_spearman: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub consensus_loss: Option<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
}

/// Shuffled minibatch AdamW training. The shuffle order comes from
/// `settings.shuffle_seed`; a fresh graph is built for every step.
pub fn train(
    model: &mut Mlp,
    train_x: &Tensor,
    train_y: &[usize],
    test: Option<(&Tensor, &[usize])>,
    settings: &TrainSettings,
    objective: &mut impl Objective,
) -> Result<History> {
    if train_x.rows() != train_y.len() {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: train_x.shape(),
            right: crate::tensor::Shape::new(train_y.len(), 1),
        });
    }
    if train_y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if settings.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    model.check_width(train_x.cols())?;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.shuffle_seed);
    let mut optimizer = AdamW::new(settings.learning_rate, settings.weight_decay);
    let mut order: Vec<usize> = (0..train_y.len()).collect();
    let mut history = History::default();

    for epoch in 0..settings.epochs {
        order.shuffle(&mut rng);
        let mut task_sum = 0.0;
        let mut consensus_sum = 0.0;
        let mut has_consensus = false;
        let mut batches = 0usize;
        for (batch, chunk) in order.chunks(settings.batch_size).enumerate() {
            let xb = train_x.select_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let wrap = |e: Error| Error::Batch {
                batch,
                source: alloc::boxed::Box::new(e),
            };

            let graph = Graph::new();
            let bound = model.bind(&graph);
            let x = graph.leaf(xb);
            let parts = objective.evaluate(&bound, x, &yb).map_err(wrap)?;
            let grads = graph
                .gradient(parts.total, &bound.params(), false)
                .map_err(wrap)?;
            let grads: Vec<Tensor> = grads.iter().map(|g| g.value()).collect();
            optimizer.step(&mut model.params_mut(), &grads).map_err(wrap)?;

            task_sum += parts.task;
            if let Some(c) = parts.consensus {
                consensus_sum += c;
                has_consensus = true;
            }
            batches += 1;
            history.steps.push(StepRecord {
                step: optimizer.steps_taken(),
                task: parts.task,
                consensus: parts.consensus,
                mean_pearson: parts.mean_pearson,
                mean_spearman: parts.mean_spearman,
            });
        }
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            task_loss: task_sum / batches as f64,
            consensus_loss: has_consensus.then(|| consensus_sum / batches as f64),
            train_accuracy: accuracy(model, train_x, train_y)?,
            test_accuracy: match test {
                Some((x, y)) => Some(accuracy(model, x, y)?),
                None => None,
            },
        });
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny_linear(w: [[f64; 2]; 3], b: [f64; 2]) -> Mlp {
        let config = MlpConfig::linear(3, 0);
        let weight = Tensor::new(3, 2, w.iter().flatten().copied().collect()).unwrap();
        Mlp::from_layers(
            config,
            vec![Layer {
                weight,
                bias: Tensor::row(&b),
            }],
        )
        .unwrap()
    }

    #[test]
    fn layer_shapes_follow_config() {
        let mlp = Mlp::new(MlpConfig::new(7, 0)).unwrap();
        let shapes: Vec<_> = mlp.params().iter().map(|p| (p.rows(), p.cols())).collect();
        assert_eq!(
            shapes,
            vec![
                (7, 100),
                (1, 100),
                (100, 100),
                (1, 100),
                (100, 100),
                (1, 100),
                (100, 2),
                (1, 2)
            ]
        );
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let a = Mlp::new(MlpConfig::new(5, 42)).unwrap();
        let b = Mlp::new(MlpConfig::new(5, 42)).unwrap();
        let c = Mlp::new(MlpConfig::new(5, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.layers().iter().all(|l| l.bias.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = MlpConfig::new(3, 0);
        c.hidden = vec![4, 0];
        assert!(Mlp::new(c).is_err());
        let mut c = MlpConfig::new(3, 0);
        c.output_dim = 1;
        assert!(Mlp::new(c).is_err());
    }

    #[test]
    fn linear_layer_reproduces_affine_map() {
        let mlp = tiny_linear([[1.0, -1.0], [2.0, 0.5], [0.0, 3.0]], [0.25, -0.5]);
        let x = Tensor::row(&[1.0, 2.0, 3.0]);
        let logits = mlp.logits(&x).unwrap();
        assert_eq!(logits.data(), &[1.0 + 4.0 + 0.25, -1.0 + 1.0 + 9.0 - 0.5]);
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let mut mlp = Mlp::new(MlpConfig::new(4, 1)).unwrap();
        for p in mlp.params_mut() {
            p.data_mut().fill(0.0);
        }
        let x = Tensor::full(3, 4, 0.7);
        assert!(mlp.logits(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mlp = Mlp::new(MlpConfig::new(4, 1)).unwrap();
        assert!(matches!(
            mlp.logits(&Tensor::zeros(2, 5)),
            Err(Error::ShapeMismatch { op: "forward", .. })
        ));
    }

    #[test]
    fn graph_and_plain_forward_agree() {
        let mut config = MlpConfig::new(6, 3);
        config.hidden = vec![9, 5];
        let mlp = Mlp::new(config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::new(4, 6, (0..24).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let g = Graph::new();
        let via_graph = mlp.forward_var(g.leaf(x.clone())).unwrap().value();
        let plain = mlp.logits(&x).unwrap();
        for (a, b) in via_graph.data().iter().zip(plain.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_reference_values() {
        let g = Graph::new();
        let uniform = g.leaf(Tensor::zeros(3, 2));
        let ce = cross_entropy(uniform, &[0, 1, 1]).unwrap().item();
        assert!((ce - core::f64::consts::LN_2).abs() < 1e-12);

        let confident = g.leaf(Tensor::row(&[20.0, -20.0]));
        assert!(cross_entropy(confident, &[0]).unwrap().item() < 1e-15);
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let g = Graph::new();
        let logits = g.leaf(Tensor::zeros(2, 2));
        assert_eq!(
            cross_entropy(logits, &[0, 2]).unwrap_err(),
            Error::LabelOutOfRange { label: 2, classes: 2 }
        );
    }

    #[test]
    fn cross_entropy_matches_softmax_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<[f64; 3]> = (0..5)
            .map(|_| {
                [
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                ]
            })
            .collect();
        let labels = [0, 2, 1, 1, 0];
        let expected = rows
            .iter()
            .zip(labels)
            .map(|(r, l)| {
                let z: f64 = r.iter().map(|v| v.exp()).sum();
                -(r[l].exp() / z).ln()
            })
            .sum::<f64>()
            / 5.0;
        let g = Graph::new();
        let logits = g.leaf(Tensor::from_rows(&rows).unwrap());
        let ce = cross_entropy(logits, &labels).unwrap().item();
        assert!((ce - expected).abs() < 1e-10);
    }

    #[test]
    fn adamw_single_step_on_scalar() {
        let mut p = Tensor::scalar(1.0);
        let mut opt = AdamW::new(0.001, 0.0);
        opt.step(&mut [&mut p], &[Tensor::scalar(1.0)]).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps)
        let expected = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-15);
        assert!((p.item() - 0.999).abs() < 1e-9);
    }

    #[test]
    fn adamw_decay_is_decoupled() {
        let mut p = Tensor::row(&[2.0, -4.0]);
        let mut opt = AdamW::new(0.01, 0.5);
        for _ in 0..3 {
            opt.step(&mut [&mut p], &[Tensor::zeros(1, 2)]).unwrap();
        }
        let factor = (1.0f64 - 0.01 * 0.5).powi(3);
        assert!((p.data()[0] - 2.0 * factor).abs() < 1e-15);
        assert!((p.data()[1] + 4.0 * factor).abs() < 1e-15);
    }

    #[test]
    fn adamw_without_decay_matches_adam() {
        let (lr, b1, b2, eps) = (0.01, 0.9, 0.999, 1e-8);
        let grads = [0.3, -1.2, 0.05, 2.0];
        let mut p = Tensor::scalar(0.5);
        let mut opt = AdamW::new(lr, 0.0);
        let (mut m, mut v, mut reference) = (0.0f64, 0.0f64, 0.5f64);
        for (t, &g) in grads.iter().enumerate() {
            opt.step(&mut [&mut p], &[Tensor::scalar(g)]).unwrap();
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32 + 1));
            let vh = v / (1.0 - b2.powi(t as i32 + 1));
            reference -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p.item() - reference).abs() < 1e-14);
    }

    #[test]
    fn adamw_rejects_misaligned_gradients() {
        let mut p = Tensor::zeros(2, 2);
        let mut opt = AdamW::new(0.1, 0.0);
        assert!(opt.step(&mut [&mut p], &[Tensor::zeros(1, 2)]).is_err());
        assert!(opt.step(&mut [&mut p], &[]).is_err());
    }

    #[test]
    fn epochs_rule() {
        assert_eq!(ModelKind::Mlp.default_epochs(0.0), 30);
        assert_eq!(ModelKind::Mlp.default_epochs(0.25), 30);
        assert_eq!(ModelKind::Mlp.default_epochs(0.5), 50);
        assert_eq!(ModelKind::Mlp.default_epochs(0.95), 50);
        assert_eq!(ModelKind::Linear.default_epochs(0.5), 10);
        assert_eq!(ModelKind::Linear.default_learning_rate(), 0.1);
    }
}
