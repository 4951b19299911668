//! In-memory datasets: splitting, standardization, junk-feature
//! augmentation, and a seeded synthetic generator.
//!
//! Every stage consumes the dataset and returns the transformed one; the
//! seeds used along the way are kept in [`Provenance`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-feature mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Mean 0, scale 1 for every feature.
    pub fn standard(features: usize) -> Self {
        FeatureStats {
            mean: alloc::vec![0.0; features],
            std: alloc::vec![1.0; features],
        }
    }

    /// Population statistics over the given rows. A feature with zero
    /// variance gets `std = 1`.
    pub fn of_rows(x: &Tensor, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = rows.len() as f64;
        let cols = x.cols();
        let mut mean = alloc::vec![0.0; cols];
        for &r in rows {
            for (m, v) in mean.iter_mut().zip(x.row_slice(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; cols];
        for &r in rows {
            for ((s, v), m) in var.iter_mut().zip(x.row_slice(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n);
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(FeatureStats { mean, std })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub synthetic_seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub train_count: Option<usize>,
    pub test_count: Option<usize>,
    pub junk_seed: Option<u64>,
    /// The affine map applied by `standardize`, if any.
    pub standardization: Option<FeatureStats>,
}

/// A binary-labelled feature matrix with an optional train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    features: Tensor,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    junk: Vec<bool>,
    train: Vec<usize>,
    test: Vec<usize>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Tensor,
        labels: Vec<usize>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::config(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::config("feature name count does not match columns"));
        }
        if features.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::config("features must be finite"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::config(format!("label {l} is not binary")));
        }
        let name = name.into();
        let cols = features.cols();
        Ok(Dataset {
            provenance: Provenance {
                source: name.clone(),
                ..Provenance::default()
            },
            name,
            features,
            labels,
            feature_names,
            junk: alloc::vec![false; cols],
            train: Vec::new(),
            test: Vec::new(),
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `true` for appended junk columns.
    pub fn junk_mask(&self) -> &[bool] {
        &self.junk
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn provenance_mut(&mut self) -> &mut Provenance {
        &mut self.provenance
    }

    pub fn is_split(&self) -> bool {
        !self.train.is_empty()
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn train_x(&self) -> Tensor {
        self.features.select_rows(&self.train)
    }

    pub fn train_y(&self) -> Vec<usize> {
        self.train.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn test_x(&self) -> Tensor {
        self.features.select_rows(&self.test)
    }

    pub fn test_y(&self) -> Vec<usize> {
        self.test.iter().map(|&i| self.labels[i]).collect()
    }

    /// Statistics of the current train-split features.
    pub fn train_stats(&self) -> Result<FeatureStats> {
        FeatureStats::of_rows(&self.features, &self.train)
    }

    /// Uniformly permutes the rows with `seed`; the first `train_count`
    /// go to train, the rest to test. Both index lists are kept sorted.
    pub fn split(mut self, train_count: usize, seed: u64) -> Result<Self> {
        if train_count == 0 || train_count >= self.len() {
            return Err(Error::config(format!(
                "train_count {train_count} must be in 1..{}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut train = order[..train_count].to_vec();
        let mut test = order[train_count..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        self.provenance.split_seed = Some(seed);
        self.provenance.train_count = Some(train.len());
        self.provenance.test_count = Some(test.len());
        self.train = train;
        self.test = test;
        Ok(self)
    }

    /// `(x − train_mean) / train_std` per feature, for every row, using
    /// statistics from the train split only.
    pub fn standardize(mut self) -> Result<Self> {
        if !self.is_split() {
            return Err(Error::config("standardize requires a train/test split"));
        }
        let stats = self.train_stats()?;
        let cols = self.features.cols();
        for (j, v) in self.features.data_mut().iter_mut().enumerate() {
            let c = j % cols;
            *v = (*v - stats.mean[c]) / stats.std[c];
        }
        self.provenance.standardization = Some(stats);
        Ok(self)
    }

    /// Appends one standard-normal junk column per existing column, drawn
    /// row-major from `seed`. Existing columns are untouched.
    pub fn add_junk_features(self, seed: u64) -> Result<Self> {
        let real = self.features.cols();
        let rows = self.features.rows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(rows * real * 2);
        for row in self.features.row_iter() {
            data.extend_from_slice(row);
            data.extend((0..real).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        }
        let mut names = self.feature_names.clone();
        names.extend((0..real).map(|j| format!("junk_{j}")));
        let mut junk = self.junk.clone();
        junk.extend(core::iter::repeat_n(true, real));
        let mut provenance = self.provenance.clone();
        provenance.junk_seed = Some(seed);
        if let Some(stats) = provenance.standardization.as_mut() {
            stats.mean.extend(core::iter::repeat_n(0.0, real));
            stats.std.extend(core::iter::repeat_n(1.0, real));
        }
        Ok(Dataset {
            features: Tensor::new(rows, real * 2, data)?,
            feature_names: names,
            junk,
            provenance,
            ..self
        })
    }
}

/// A pairwise product term `coef · φ_i · φ_j` in the synthetic logit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub coef: f64,
}

/// Replaces each raw feature in the logit with the soft step
/// `φ_i(x) = tanh(steepness · (x_i − thresholds[i]))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub steepness: f64,
    pub thresholds: Vec<f64>,
}

/// Synthetic binary task: `x ~ N(0, I)`, label ~ Bernoulli(sigmoid(z)) with
/// `z = Σ w_i φ_i + b + Σ coef · φ_i φ_j + noise · ε`, `ε ~ N(0, 1)`.
/// Without saturation `φ_i = x_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub noise: f64,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub saturation: Option<Saturation>,
}

impl SyntheticSpec {
    /// Linear logit `w·x`, no bias, noise, interactions or saturation.
    pub fn new(weights: Vec<f64>, n: usize, seed: u64) -> Self {
        SyntheticSpec {
            weights,
            bias: 0.0,
            noise: 0.0,
            n,
            seed,
            interactions: Vec::new(),
            saturation: None,
        }
    }

    /// Seven features with thresholded effects and one interaction; two
    /// features carry weight only through the interaction or not at all.
    /// A 3×32 MLP reaches about 87% test accuracy against about 81% for
    /// logistic regression.
    pub fn benchmark(n: usize, seed: u64) -> Self {
        SyntheticSpec {
            weights: alloc::vec![3.0, -2.0, 1.6, 1.0, -0.6, 0.0, 0.0],
            interactions: alloc::vec![Interaction {
                i: 0,
                j: 1,
                coef: 1.0
            }],
            saturation: Some(Saturation {
                steepness: 6.0,
                thresholds: (0..7).map(|i| 0.3 * i as f64 - 0.9).collect(),
            }),
            ..SyntheticSpec::new(Vec::new(), n, seed)
        }
    }

    fn phi(&self, x: &[f64], i: usize) -> f64 {
        match &self.saturation {
            Some(s) => libm::tanh(s.steepness * (x[i] - s.thresholds[i])),
            None => x[i],
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let main: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.phi(x, i))
            .sum();
        let pairs: f64 = self
            .interactions
            .iter()
            .map(|t| t.coef * self.phi(x, t.i) * self.phi(x, t.j))
            .sum();
        main + self.bias + pairs
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let d = spec.weights.len();
    if d == 0 || spec.n == 0 {
        return Err(Error::EmptyInput);
    }
    if spec.interactions.iter().any(|t| t.i >= d || t.j >= d) {
        return Err(Error::config("interaction index out of range"));
    }
    if let Some(s) = &spec.saturation {
        if s.thresholds.len() != d || !(s.steepness > 0.0) {
            return Err(Error::config(
                "saturation needs one threshold per feature and positive steepness",
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eps: f64 = StandardNormal.sample(&mut rng);
        let z = spec.logit(&x) + spec.noise * eps;
        let p = 1.0 / (1.0 + libm::exp(-z));
        labels.push(usize::from(rng.random::<f64>() < p));
        data.extend(x);
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    let mut ds = Dataset::new("synthetic", Tensor::new(spec.n, d, data)?, labels, names)?;
    ds.provenance.synthetic_seed = Some(spec.seed);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> Dataset {
        let spec = SyntheticSpec::new(vec![1.0, -2.0, 0.5], 200, 3);
        let mut ds = synthetic(&spec).unwrap();
        // shift and scale raw features so standardization has work to do
        let cols = ds.features.cols();
        for (j, v) in ds.features.data_mut().iter_mut().enumerate() {
            *v = *v * (j % cols + 1) as f64 + 10.0;
        }
        ds
    }

    #[test]
    fn split_counts_disjoint_and_covering() {
        let ds = toy().split(150, 9).unwrap();
        assert_eq!(ds.train_indices().len(), 150);
        assert_eq!(ds.test_indices().len(), 50);
        let mut all: Vec<usize> = ds
            .train_indices()
            .iter()
            .chain(ds.test_indices())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let a = toy().split(150, 9).unwrap();
        let b = toy().split(150, 9).unwrap();
        let c = toy().split(150, 10).unwrap();
        assert_eq!(a.train_indices(), b.train_indices());
        assert_ne!(a.train_indices(), c.train_indices());
    }

    #[test]
    fn split_rejects_bad_counts() {
        assert!(toy().split(0, 1).is_err());
        assert!(toy().split(200, 1).is_err());
    }

    #[test]
    fn standardize_uses_train_statistics() {
        let raw = toy().split(150, 1).unwrap();
        let stats = raw.train_stats().unwrap();
        let std = raw.clone().standardize().unwrap();
        let train_stats = std.train_stats().unwrap();
        for j in 0..3 {
            assert!(train_stats.mean[j].abs() < 1e-10);
            assert!((train_stats.std[j] - 1.0).abs() < 1e-10);
        }
        // test rows transformed with the train statistics
        for &r in raw.test_indices() {
            for j in 0..3 {
                let expected = (raw.features().get(r, j) - stats.mean[j]) / stats.std[j];
                assert!((std.features().get(r, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_feature_is_centered_only() {
        let x = Tensor::from_rows(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0], [5.0, 4.0]]).unwrap();
        let ds = Dataset::new("c", x, vec![0, 1, 0, 1], vec!["a".into(), "b".into()])
            .unwrap()
            .split(3, 0)
            .unwrap()
            .standardize()
            .unwrap();
        assert!(ds.features().row_iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn standardize_requires_split() {
        assert!(toy().standardize().is_err());
    }

    #[test]
    fn junk_doubles_features_and_keeps_real_columns() {
        let ds = toy().split(150, 1).unwrap().standardize().unwrap();
        let junked = ds.clone().add_junk_features(4).unwrap();
        assert_eq!(junked.feature_count(), 6);
        assert_eq!(junked.junk_mask(), &[false, false, false, true, true, true]);
        for r in 0..ds.len() {
            for j in 0..3 {
                assert_eq!(
                    junked.features().get(r, j).to_bits(),
                    ds.features().get(r, j).to_bits()
                );
            }
        }
        assert_eq!(junked, ds.add_junk_features(4).unwrap());
    }

    #[test]
    fn rejects_non_binary_labels_and_non_finite_values() {
        let x = Tensor::zeros(2, 1);
        assert!(Dataset::new("x", x.clone(), vec![0, 2], vec!["a".into()]).is_err());
        let bad = Tensor::new(2, 1, vec![0.0, f64::NAN]).unwrap();
        assert!(Dataset::new("x", bad, vec![0, 1], vec!["a".into()]).is_err());
    }

    #[test]
    fn noiseless_steep_synthetic_is_separable_by_its_weights() {
        let spec = SyntheticSpec::new(vec![400.0, -300.0], 2000, 1);
        let ds = synthetic(&spec).unwrap();
        let correct = ds
            .features()
            .row_iter()
            .zip(ds.labels())
            .filter(|(x, &y)| usize::from(spec.logit(x) > 0.0) == y)
            .count();
        assert!(correct as f64 / 2000.0 > 0.99);
        let positives = ds.labels().iter().sum::<usize>() as f64 / 2000.0;
        assert!((positives - 0.5).abs() < 0.05);
    }

    #[test]
    fn saturation_shapes_the_logit() {
        let spec = SyntheticSpec::benchmark(10, 0);
        let x = [0.0; 7];
        let want: f64 = (0..7)
            .map(|i| spec.weights[i] * libm::tanh(6.0 * (0.9 - 0.3 * i as f64)))
            .sum::<f64>()
            + libm::tanh(6.0 * 0.9) * libm::tanh(6.0 * 0.6);
        assert!((spec.logit(&x) - want).abs() < 1e-12);
        let mut bad = spec.clone();
        bad.saturation.as_mut().unwrap().thresholds.pop();
        assert!(synthetic(&bad).is_err());
    }
}
