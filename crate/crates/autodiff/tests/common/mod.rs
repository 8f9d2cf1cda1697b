//! Random differentiable cases, one family per tape primitive.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use unlearnprobe_autodiff::{Csr, Result, SparseConst, Tape, Tensor, Var};

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::new(r, c, (0..r * c).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Values bounded away from zero so ReLU's kink is never straddled.
pub fn randn_off_zero(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    randn(rng, r, c).map(|v| if v.abs() < 0.05 { v.signum() * 0.05 + v } else { v })
}

pub fn positive(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::new(r, c, (0..r * c).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap()
}

/// `sum(w * y)` for a fixed random weight, so every output entry matters.
pub fn weighted<'t>(y: Var<'t>, w: &Tensor) -> Result<Var<'t>> {
    let wv = y.tape().constant(w.clone());
    y.mul(wv).map(Var::sum)
}

pub type Case = Box<dyn Fn(&mut ChaCha8Rng) -> (Tensor, Box<dyn for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>>)>;

pub fn primitive_cases() -> Vec<(&'static str, Case)> {
    let mut cases: Vec<(&'static str, Case)> = Vec::new();
    cases.push((
        "matmul_lhs",
        Box::new(|rng| {
            let b = randn(rng, 4, 3);
            let w = randn(rng, 3, 3);
            (randn(rng, 3, 4), Box::new(move |t, x| weighted(x.matmul(t.constant(b.clone()))?, &w)))
        }),
    ));
    cases.push((
        "matmul_rhs",
        Box::new(|rng| {
            let a = randn(rng, 2, 4);
            let w = randn(rng, 2, 3);
            (randn(rng, 4, 3), Box::new(move |t, x| weighted(t.constant(a.clone()).matmul(x)?, &w)))
        }),
    ));
    cases.push((
        "transpose",
        Box::new(|rng| {
            let w = randn(rng, 4, 2);
            (randn(rng, 2, 4), Box::new(move |_, x| weighted(x.t(), &w)))
        }),
    ));
    cases.push((
        "spmm",
        Box::new(|rng| {
            let mut trip = Vec::new();
            for r in 0..4 {
                for c in 0..4 {
                    if rng.random_bool(0.4) {
                        trip.push((r, c, rng.sample::<f64, _>(StandardNormal)));
                    }
                }
            }
            let sp = SparseConst::new(Csr::from_triplets(4, 4, &trip).unwrap());
            let w = randn(rng, 4, 3);
            (randn(rng, 4, 3), Box::new(move |t, x| weighted(t.spmm(&sp, x)?, &w)))
        }),
    ));
    for (name, shape) in [("add_full", [3, 4]), ("add_row", [1, 4]), ("add_col", [3, 1]), ("add_scalar_bcast", [1, 1])] {
        cases.push((
            name,
            Box::new(move |rng| {
                let a = randn(rng, 3, 4);
                let w = randn(rng, 3, 4);
                (randn(rng, shape[0], shape[1]), Box::new(move |t, x| weighted(t.constant(a.clone()).add(x)?, &w)))
            }),
        ));
    }
    cases.push((
        "sub_both",
        Box::new(|rng| {
            let w = randn(rng, 3, 3);
            (randn(rng, 3, 3), Box::new(move |t, x| {
                let b = t.constant(Tensor::full(3, 3, 0.3));
                weighted(x.sub(b)?.sub(x.scale(0.5))?.sub(x.sum_cols())?, &w)
            }))
        }),
    ));
    cases.push((
        "mul_row",
        Box::new(|rng| {
            let a = randn(rng, 3, 4);
            let w = randn(rng, 3, 4);
            (randn(rng, 1, 4), Box::new(move |t, x| weighted(t.constant(a.clone()).mul(x)?.mul(x)?, &w)))
        }),
    ));
    cases.push((
        "div_col",
        Box::new(|rng| {
            let a = randn(rng, 3, 4);
            let w = randn(rng, 3, 4);
            (positive(rng, 3, 1), Box::new(move |t, x| weighted(t.constant(a.clone()).div(x)?, &w)))
        }),
    ));
    cases.push((
        "div_num",
        Box::new(|rng| {
            let b = positive(rng, 3, 4);
            let w = randn(rng, 3, 4);
            (randn(rng, 3, 4), Box::new(move |t, x| weighted(x.div(t.constant(b.clone()))?, &w)))
        }),
    ));
    cases.push((
        "scale_shift",
        Box::new(|rng| {
            let w = randn(rng, 2, 3);
            (randn(rng, 2, 3), Box::new(move |_, x| weighted(x.scale(-1.7).add_scalar(0.4), &w)))
        }),
    ));
    cases.push((
        "relu",
        Box::new(|rng| {
            let w = randn(rng, 3, 3);
            (randn_off_zero(rng, 3, 3), Box::new(move |_, x| weighted(x.relu(), &w)))
        }),
    ));
    cases.push((
        "sigmoid",
        Box::new(|rng| {
            let w = randn(rng, 3, 3);
            (randn(rng, 3, 3), Box::new(move |_, x| weighted(x.sigmoid(), &w)))
        }),
    ));
    cases.push((
        "log",
        Box::new(|rng| {
            let w = randn(rng, 3, 2);
            (positive(rng, 3, 2), Box::new(move |_, x| weighted(x.log()?, &w)))
        }),
    ));
    cases.push((
        "exp",
        Box::new(|rng| {
            let w = randn(rng, 3, 2);
            (randn(rng, 3, 2), Box::new(move |_, x| weighted(x.exp()?, &w)))
        }),
    ));
    cases.push((
        "pow",
        Box::new(|rng| {
            let w = randn(rng, 2, 3);
            (positive(rng, 2, 3), Box::new(move |_, x| weighted(x.pow(-0.5)?.add(x.pow(2.5)?)?, &w)))
        }),
    ));
    cases.push((
        "row_softmax",
        Box::new(|rng| {
            let w = randn(rng, 3, 4);
            (randn(rng, 3, 4), Box::new(move |_, x| weighted(x.row_softmax(), &w)))
        }),
    ));
    cases.push((
        "log_softmax",
        Box::new(|rng| {
            let w = randn(rng, 3, 4);
            (randn(rng, 3, 4), Box::new(move |_, x| weighted(x.log_softmax(), &w)))
        }),
    ));
    cases.push((
        "reductions",
        Box::new(|rng| {
            let w1 = randn(rng, 1, 4);
            let w2 = randn(rng, 3, 1);
            (randn(rng, 3, 4), Box::new(move |_, x| {
                let a = weighted(x.sum_rows(), &w1)?;
                let b = weighted(x.sum_cols(), &w2)?;
                let c = x.mul(x)?.mean();
                a.add(b)?.add(c)
            }))
        }),
    ));
    cases.push((
        "expand",
        Box::new(|rng| {
            let w = randn(rng, 3, 4);
            (randn(rng, 1, 4), Box::new(move |_, x| weighted(x.expand(3, 4)?, &w)))
        }),
    ));
    cases.push((
        "trace",
        Box::new(|rng| {
            let a = randn(rng, 3, 3);
            (randn(rng, 3, 3), Box::new(move |t, x| x.matmul(t.constant(a.clone()))?.mul(x)?.trace()))
        }),
    ));
    cases.push((
        "row_normalize",
        Box::new(|rng| {
            let w = randn(rng, 3, 4);
            (positive(rng, 3, 4), Box::new(move |_, x| weighted(x.row_normalize(1e-8)?, &w)))
        }),
    ));
    cases
}
