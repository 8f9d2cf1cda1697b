mod common;

use common::{primitive_cases, randn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unlearnprobe_autodiff::{finite_diff_check, Result, Tape, Tensor, Var};

#[test]
fn every_primitive_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, case) in primitive_cases() {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (x, f) = case(&mut rng);
            worst = worst.max(finite_diff_check(|t, v| f(t, v), &x, 1e-5).unwrap());
        }
        assert!(worst < 1e-4, "{name}: max rel error {worst:e}");
    }
}

#[test]
fn every_primitive_double_backward_matches_central_differences() {
    // h(x) = <grad f(x), r> must itself differentiate correctly.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (name, case) in primitive_cases() {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let (x, f) = case(&mut rng);
            let r = randn(&mut rng, x.rows(), x.cols());
            let err = finite_diff_check(
                |t, v| {
                    // The numeric side passes constants; the inner gradient
                    // still needs a param to differentiate against.
                    let p = if v.requires_grad() { v } else { t.param(v.value().as_ref().clone()) };
                    let y = f(t, p)?;
                    let g = t.grad(y, &[p], true)?.values[0];
                    let inner = g.mul(t.constant(r.clone()))?.sum();
                    if v.requires_grad() {
                        Ok(inner)
                    } else {
                        Ok(inner.detach())
                    }
                },
                &x,
                1e-5,
            )
            .unwrap();
            worst = worst.max(err);
        }
        assert!(worst < 1e-3, "{name}: second-order max rel error {worst:e}");
    }
}

#[test]
fn cross_entropy_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels = [0usize, 2, 1, 2];
    let mut onehot = Tensor::zeros(4, 3);
    for (i, &y) in labels.iter().enumerate() {
        onehot.set(i, y, 1.0);
    }
    let logits = randn(&mut rng, 4, 3);
    let err = finite_diff_check(
        |t, z| Ok(z.log_softmax().mul(t.constant(onehot.clone()))?.sum().scale(-0.25)),
        &logits,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn constant_function_has_zero_error() {
    let x = Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap();
    let err = finite_diff_check(|t, _| Ok(t.scalar(4.0)), &x, 1e-5).unwrap();
    assert_eq!(err, 0.0);
}

#[test]
fn sum_of_squares_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = randn(&mut rng, 1, 4);
    let err = finite_diff_check(|_, v| Ok(v.mul(v)?.sum()), &x, 1e-5).unwrap();
    assert!(err < 1e-5, "{err:e}");
}

/// ‖∇_W CE(softmax(x W), y)‖² differentiated w.r.t. x, against central
/// differences of the same quantity computed with first-order gradients only.
#[test]
fn gradient_norm_objective_double_backward() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let w = randn(&mut rng, 5, 3);
        let x = randn(&mut rng, 4, 5);
        let mut onehot = Tensor::zeros(4, 3);
        for i in 0..4 {
            onehot.set(i, rng.random_range(0..3), 1.0);
        }
        let grad_norm = |t: &Tape, xv: Var<'_>, create: bool| -> Result<f64> {
            let wv = t.param(w.clone());
            let loss = xv.matmul(wv)?.log_softmax().mul(t.constant(onehot.clone()))?.sum().scale(-0.25);
            let g = t.grad(loss, &[wv], create)?.values[0];
            Ok(g.mul(g)?.sum().item())
        };
        let analytic = {
            let t = Tape::new();
            let xv = t.param(x.clone());
            let wv = t.param(w.clone());
            let loss = xv.matmul(wv).unwrap().log_softmax().mul(t.constant(onehot.clone())).unwrap().sum().scale(-0.25);
            let g = t.grad(loss, &[wv], true).unwrap().values[0];
            let obj = g.mul(g).unwrap().sum();
            t.grad(obj, &[xv], false).unwrap().values[0].value().as_ref().clone()
        };
        let eps = 1e-5;
        for i in 0..x.len() {
            let bump = |d: f64| {
                let mut data = x.data().to_vec();
                data[i] += d;
                let t = Tape::new();
                grad_norm(&t, t.constant(Tensor::new(4, 5, data).unwrap()), false).unwrap()
            };
            let numeric = (bump(eps) - bump(-eps)) / (2.0 * eps);
            let a = analytic.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-3, "entry {i}: analytic {a} numeric {numeric}");
        }
    }
}

#[test]
fn replay_is_bit_identical() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = randn(&mut rng, 3, 4);
        let w = randn(&mut rng, 4, 2);
        let t = Tape::new();
        let xv = t.param(x);
        let wv = t.param(w);
        let y = xv.matmul(wv).unwrap().relu().log_softmax().sum();
        let g = t.grad(y, &[xv, wv], true).unwrap();
        let obj = g.values[1].mul(g.values[1]).unwrap().sum();
        let gx = t.grad(obj, &[xv], false).unwrap();
        gx.values[0].value().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
