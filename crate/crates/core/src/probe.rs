//! Planar slices of input space through three data points, and how well an
//! affine function of the plane coordinates explains the logit there.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::mean_stderr;
use crate::nn::Model;
use crate::tensor::Tensor;

pub const DEFAULT_RESOLUTION: usize = 51;
pub const DEFAULT_EXTENT: (f64, f64) = (-0.2, 1.2);

/// The first-class logit on the plane `x₁ + u(x₂ − x₁) + v(x₃ − x₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneProbe {
    pub anchors: [usize; 3],
    /// Grid coordinates shared by both axes.
    pub coords: Vec<f64>,
    /// `logits[i * coords.len() + j]` is at `u = coords[i]`, `v = coords[j]`.
    pub logits: Vec<f64>,
    /// Least-squares `logit ≈ a·u + b·v + c`, stored as `[a, b, c]`.
    pub fit: [f64; 3],
    pub mae: f64,
}

impl PlaneProbe {
    pub fn resolution(&self) -> usize {
        self.coords.len()
    }

    /// `u,v,logit,fitted` rows with header.
    pub fn to_csv(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut out = alloc::string::String::from("u,v,logit,fitted\n");
        let r = self.coords.len();
        for i in 0..r {
            for j in 0..r {
                let (u, v) = (self.coords[i], self.coords[j]);
                let fitted = self.fit[0] * u + self.fit[1] * v + self.fit[2];
                let _ = writeln!(out, "{u},{v},{},{fitted}", self.logits[i * r + j]);
            }
        }
        out
    }
}

fn grid(resolution: usize, extent: (f64, f64)) -> Vec<f64> {
    if resolution == 1 {
        return alloc::vec![extent.0];
    }
    let step = (extent.1 - extent.0) / (resolution - 1) as f64;
    (0..resolution).map(|i| extent.0 + step * i as f64).collect()
}

pub fn plane_probe(
    model: &impl Model,
    points: &Tensor,
    anchors: [usize; 3],
    resolution: usize,
    extent: (f64, f64),
) -> Result<PlaneProbe> {
    if resolution < 2 {
        return Err(Error::config("plane resolution must be at least 2"));
    }
    let n = points.rows();
    if anchors.iter().any(|&a| a >= n) {
        return Err(Error::config("anchor index out of range"));
    }
    if anchors[0] == anchors[1] || anchors[0] == anchors[2] || anchors[1] == anchors[2] {
        return Err(Error::config("plane anchors must be distinct"));
    }
    let x1 = points.row_slice(anchors[0]);
    let x2 = points.row_slice(anchors[1]);
    let x3 = points.row_slice(anchors[2]);
    let coords = grid(resolution, extent);
    let d = points.cols();
    let mut inputs = Vec::with_capacity(resolution * resolution * d);
    for &u in &coords {
        for &v in &coords {
            inputs.extend((0..d).map(|k| x1[k] + u * (x2[k] - x1[k]) + v * (x3[k] - x1[k])));
        }
    }
    let out = model.logits(&Tensor::new(resolution * resolution, d, inputs)?)?;
    let logits: Vec<f64> = (0..out.rows()).map(|r| out.get(r, 0)).collect();

    let mut design = Vec::with_capacity(logits.len() * 3);
    for &u in &coords {
        for &v in &coords {
            design.extend_from_slice(&[u, v, 1.0]);
        }
    }
    let ones = alloc::vec![1.0; logits.len()];
    let beta = linalg::weighted_least_squares(&design, 3, &logits, &ones, &[0.0; 3])?;
    let fit = [beta[0], beta[1], beta[2]];
    let mae = design
        .chunks_exact(3)
        .zip(&logits)
        .map(|(row, y)| libm::fabs(y - (fit[0] * row[0] + fit[1] * row[1] + fit[2])))
        .sum::<f64>()
        / logits.len() as f64;
    Ok(PlaneProbe {
        anchors,
        coords,
        logits,
        fit,
        mae,
    })
}

/// `count` triples of distinct indices below `n`, drawn from `seed`.
pub fn sample_anchors(n: usize, count: usize, seed: u64) -> Result<Vec<[usize; 3]>> {
    if n < 3 {
        return Err(Error::config("need at least three points for a plane"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut c = rng.random_range(0..n - 2);
        if c >= lo {
            c += 1;
        }
        if c >= hi {
            c += 1;
        }
        out.push([a, b, c]);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFitSummary {
    pub mean_mae: f64,
    pub std_err: f64,
    pub planes: Vec<PlaneProbe>,
}

/// Mean affine-fit MAE over `n_planes` planes with anchors from
/// [`sample_anchors`].
pub fn linear_fit_mae(
    model: &impl Model,
    points: &Tensor,
    n_planes: usize,
    anchor_seed: u64,
    resolution: usize,
) -> Result<LinearFitSummary> {
    if n_planes == 0 {
        return Err(Error::config("n_planes must be positive"));
    }
    let planes = sample_anchors(points.rows(), n_planes, anchor_seed)?
        .into_iter()
        .map(|a| plane_probe(model, points, a, resolution, DEFAULT_EXTENT))
        .collect::<Result<Vec<_>>>()?;
    let maes: Vec<f64> = planes.iter().map(|p| p.mae).collect();
    let (mean_mae, std_err) = mean_stderr(&maes).expect("at least one plane");
    Ok(LinearFitSummary {
        mean_mae,
        std_err,
        planes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mlp, MlpConfig};

    fn points() -> Tensor {
        Tensor::from_rows(&[
            [0.1, 0.5, -0.3],
            [1.0, -1.0, 0.2],
            [-0.4, 0.8, 0.9],
            [0.7, 0.3, -1.2],
        ])
        .unwrap()
    }

    #[test]
    fn anchors_reproduce_their_logits() {
        let m = Mlp::new(MlpConfig::new(3, 4)).unwrap();
        let pts = points();
        let p = plane_probe(&m, &pts, [0, 2, 3], 11, (0.0, 1.0)).unwrap();
        let logits = m.logits(&pts).unwrap();
        let r = p.resolution();
        assert!((p.logits[0] - logits.get(0, 0)).abs() < 1e-12);
        assert!((p.logits[(r - 1) * r] - logits.get(2, 0)).abs() < 1e-12);
        assert!((p.logits[r - 1] - logits.get(3, 0)).abs() < 1e-12);
        assert!(p.mae > 0.0);
    }

    #[test]
    fn linear_model_has_zero_residual() {
        let m = Mlp::new(MlpConfig::linear(3, 2)).unwrap();
        let s = linear_fit_mae(&m, &points(), 4, 9, DEFAULT_RESOLUTION).unwrap();
        assert!(s.mean_mae < 1e-8);
    }

    #[test]
    fn anchors_are_distinct_and_seeded() {
        let a = sample_anchors(5, 200, 1).unwrap();
        assert!(a
            .iter()
            .all(|t| t[0] != t[1] && t[0] != t[2] && t[1] != t[2] && t.iter().all(|&i| i < 5)));
        assert_eq!(a, sample_anchors(5, 200, 1).unwrap());
        assert!(plane_probe(
            &Mlp::new(MlpConfig::linear(3, 0)).unwrap(),
            &points(),
            [1, 1, 2],
            5,
            DEFAULT_EXTENT
        )
        .is_err());
    }
}
