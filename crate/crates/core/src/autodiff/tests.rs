use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

/// Central-difference gradient of a scalar function of one tensor.
fn finite_diff(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> f64) -> Vec<f64> {
    (0..x.data().len())
        .map(|i| {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// Checks the analytic gradient of `build(x)` (reduced by a fixed random
/// weighting) against central differences.
fn check_unary(x: Tensor, build: impl for<'g> Fn(Var<'g>) -> Var<'g>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let probe = {
        let g = Graph::new();
        let s = build(g.leaf(x.clone())).shape();
        rand_tensor(&mut rng, s.rows, s.cols, -1.0, 1.0)
    };
    let eval = |t: &Tensor| {
        let g = Graph::new();
        let y = build(g.leaf(t.clone()));
        y.mul(g.leaf(probe.clone())).unwrap().sum().item()
    };
    let g = Graph::new();
    let xv = g.leaf(x.clone());
    let y = build(xv).mul(g.leaf(probe.clone())).unwrap().sum();
    let grad = g.gradient(y, &[xv], false).unwrap()[0].value();
    rel_err(grad.data(), &finite_diff(&x, 1e-6, eval))
}

#[test]
fn matmul_shape_algebra() {
    let g = Graph::new();
    let a = g.leaf(Tensor::zeros(2, 3));
    let b = g.leaf(Tensor::zeros(3, 1));
    assert_eq!(a.matmul(b).unwrap().shape(), Shape::new(2, 1));
    let err = b.matmul(a).unwrap_err();
    assert_eq!(
        err,
        Error::ShapeMismatch {
            op: "matmul",
            left: Shape::new(3, 1),
            right: Shape::new(2, 3)
        }
    );
}

#[test]
fn relu_and_log_softmax_values() {
    let g = Graph::new();
    let x = g.leaf(Tensor::row(&[-1.0, 2.0]));
    assert_eq!(x.relu().value().data(), &[0.0, 2.0]);
    let z = g.leaf(Tensor::row(&[0.0, 0.0]));
    let ln2 = core::f64::consts::LN_2;
    for v in z.log_softmax().value().data() {
        assert!((v + ln2).abs() < 1e-15);
    }
}

#[test]
fn elementwise_shape_mismatch_is_rejected() {
    let g = Graph::new();
    let a = g.leaf(Tensor::zeros(2, 3));
    let b = g.leaf(Tensor::zeros(3, 2));
    assert!(matches!(a.add(b), Err(Error::ShapeMismatch { op: "add", .. })));
}

#[test]
fn square_and_second_derivative_of_cube() {
    let g = Graph::new();
    let x = g.scalar(3.0);
    let y = x.mul(x).unwrap();
    let dx = g.gradient(y, &[x], false).unwrap();
    assert_eq!(dx[0].item(), 6.0);

    let g = Graph::new();
    let x = g.scalar(2.0);
    let y = x.powf(3.0);
    let dx = g.gradient(y, &[x], true).unwrap()[0];
    assert!((dx.item() - 12.0).abs() < 1e-12);
    let ddx = g.gradient(dx, &[x], false).unwrap()[0];
    assert!((ddx.item() - 12.0).abs() < 1e-12);
}

#[test]
fn non_scalar_output_is_rejected() {
    let g = Graph::new();
    let x = g.leaf(Tensor::zeros(2, 2));
    assert_eq!(
        g.gradient(x.exp(), &[x], false).unwrap_err(),
        Error::NonScalarOutput(Shape::new(2, 2))
    );
}

#[test]
fn foreign_tensor_is_rejected() {
    let g1 = Graph::new();
    let g2 = Graph::new();
    let x = g1.scalar(1.0);
    let y = g2.scalar(1.0);
    assert_eq!(g2.gradient(y, &[x], false).unwrap_err(), Error::ForeignTensor);
}

#[test]
fn unreachable_wrt_gets_zero_gradient() {
    let g = Graph::new();
    let x = g.scalar(1.0);
    let unused = g.leaf(Tensor::full(2, 3, 4.0));
    let y = x.exp();
    let grads = g.gradient(y, &[unused, x], false).unwrap();
    assert_eq!(grads[0].value(), Tensor::zeros(2, 3));
    assert!((grads[1].item() - core::f64::consts::E).abs() < 1e-15);
}

#[test]
fn gradient_without_create_graph_discards_backward_nodes() {
    let g = Graph::new();
    let x = g.leaf(Tensor::row(&[1.0, 2.0, 3.0]));
    let y = x.exp().sum();
    let before = g.len();
    let grads = g.gradient(y, &[x], false).unwrap();
    assert_eq!(g.len(), before + 1);
    assert_eq!(grads[0].value(), x.exp().value());
}

#[test]
fn every_primitive_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = rand_tensor(&mut rng, 3, 4, 0.3, 2.0);
    let mixed = rand_tensor(&mut rng, 3, 4, -2.0, 2.0);
    let other = rand_tensor(&mut rng, 3, 4, 0.5, 1.5);
    let right = rand_tensor(&mut rng, 4, 2, -1.0, 1.0);

    let cases: Vec<(&str, f64)> = vec![
        (
            "add",
            check_unary(x.clone(), |v| v.add(v.graph().leaf(other.clone())).unwrap()),
        ),
        (
            "sub",
            check_unary(x.clone(), |v| v.graph().leaf(other.clone()).sub(v).unwrap()),
        ),
        ("mul", check_unary(x.clone(), |v| v.mul(v).unwrap())),
        (
            "div_num",
            check_unary(x.clone(), |v| v.div(v.graph().leaf(other.clone())).unwrap()),
        ),
        (
            "div_den",
            check_unary(x.clone(), |v| v.graph().leaf(other.clone()).div(v).unwrap()),
        ),
        ("neg", check_unary(x.clone(), |v| v.neg())),
        ("scale", check_unary(x.clone(), |v| v.scale(-2.5).offset(1.0))),
        (
            "matmul_left",
            check_unary(x.clone(), |v| v.matmul(v.graph().leaf(right.clone())).unwrap()),
        ),
        (
            "matmul_right",
            check_unary(right.clone(), |v| v.graph().leaf(x.clone()).matmul(v).unwrap()),
        ),
        ("transpose", check_unary(x.clone(), |v| v.t())),
        ("relu", check_unary(mixed.clone(), |v| v.relu())),
        ("exp", check_unary(mixed.clone(), |v| v.exp())),
        ("log", check_unary(x.clone(), |v| v.ln())),
        ("abs", check_unary(mixed.clone(), |v| v.abs())),
        ("sqrt", check_unary(x.clone(), |v| v.sqrt())),
        ("power", check_unary(x.clone(), |v| v.powf(2.7))),
        ("sum", check_unary(x.clone(), |v| v.sum())),
        ("mean", check_unary(x.clone(), |v| v.mean())),
        ("sum_cols", check_unary(x.clone(), |v| v.sum_cols())),
        ("sum_rows", check_unary(x.clone(), |v| v.sum_rows())),
        (
            "broadcast",
            check_unary(Tensor::row(&[0.2, -0.4]), |v| {
                v.broadcast_to(Shape::new(3, 2)).unwrap()
            }),
        ),
        (
            "gather",
            check_unary(x.clone(), |v| v.gather_cols(&[3, 0, 1]).unwrap()),
        ),
        ("slice", check_unary(x.clone(), |v| v.slice_rows(1, 2).unwrap())),
        (
            "concat",
            check_unary(x.clone(), |v| concat_rows(&[v, v.exp(), v]).unwrap()),
        ),
        ("log_softmax", check_unary(mixed.clone(), |v| v.log_softmax())),
        ("tanh", check_unary(mixed.clone(), |v| v.tanh().unwrap())),
        (
            "soft_rank",
            check_unary(mixed.clone(), |v| crate::rank::soft_rank_rows(v, 0.3).unwrap()),
        ),
    ];
    for (name, err) in cases {
        assert!(err < 1e-5, "{name}: relative error {err}");
    }
}

/// f(x) = sum(tanh(x W1) W2)² style smooth test function on a 1×n input.
fn smooth<'g>(x: Var<'g>, w1: &Tensor, w2: &Tensor) -> Var<'g> {
    let g = x.graph();
    let h = x.matmul(g.leaf(w1.clone())).unwrap().tanh().unwrap();
    let o = h.matmul(g.leaf(w2.clone())).unwrap();
    o.mul(o).unwrap().sum().add(x.exp().sum()).unwrap()
}

#[test]
fn mixed_second_partials_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 4;
    let w1 = rand_tensor(&mut rng, n, 6, -1.0, 1.0);
    let w2 = rand_tensor(&mut rng, 6, 1, -1.0, 1.0);
    let x0 = rand_tensor(&mut rng, 1, n, -0.5, 0.5);

    let mut hessian = vec![vec![0.0; n]; n];
    for (i, row) in hessian.iter_mut().enumerate() {
        let g = Graph::new();
        let x = g.leaf(x0.clone());
        let y = smooth(x, &w1, &w2);
        let dx = g.gradient(y, &[x], true).unwrap()[0];
        let di = dx.gather_cols(&[i]).unwrap().sum();
        *row = g.gradient(di, &[x], false).unwrap()[0].value().into_data();
    }
    for i in 0..n {
        for j in 0..n {
            assert!((hessian[i][j] - hessian[j][i]).abs() < 1e-6);
        }
    }
}

#[test]
fn second_order_matches_finite_differences_of_first_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 5;
    let w1 = rand_tensor(&mut rng, n, 8, -1.0, 1.0);
    let w2 = rand_tensor(&mut rng, 8, 1, -1.0, 1.0);
    let x0 = rand_tensor(&mut rng, 1, n, -0.5, 0.5);
    let probe = rand_tensor(&mut rng, 1, n, -1.0, 1.0);

    // d/dx <probe, ∇f(x)>
    let first = |x: &Tensor| -> f64 {
        let g = Graph::new();
        let xv = g.leaf(x.clone());
        let dx = g.gradient(smooth(xv, &w1, &w2), &[xv], false).unwrap()[0];
        dx.value()
            .data()
            .iter()
            .zip(probe.data())
            .map(|(a, b)| a * b)
            .sum()
    };
    let g = Graph::new();
    let x = g.leaf(x0.clone());
    let dx = g.gradient(smooth(x, &w1, &w2), &[x], true).unwrap()[0];
    let inner = dx.mul(g.leaf(probe.clone())).unwrap().sum();
    let ddx = g.gradient(inner, &[x], false).unwrap()[0].value();
    let fd = finite_diff(&x0, 1e-5, first);
    assert!(rel_err(ddx.data(), &fd) < 1e-3);
}

#[test]
fn replay_reproduces_values_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = Graph::new();
    let x = g.leaf(rand_tensor(&mut rng, 3, 4, -1.0, 1.0));
    let w = g.leaf(rand_tensor(&mut rng, 4, 4, -1.0, 1.0));
    let h = x.matmul(w).unwrap().relu();
    let r = crate::rank::soft_rank_rows(h, 0.5).unwrap();
    let y = r.mul(h).unwrap().log_softmax().sum();
    let _ = g.gradient(y, &[w], true).unwrap();
    assert!(g.replay_matches());
}
