//! Central-difference gradient checking.

use crate::error::{AutodiffError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Largest elementwise relative error between the tape gradient of `f` at
/// `x` and a central-difference estimate with step `eps`.
///
/// The denominator is `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    if eps <= 0.0 {
        return Err(AutodiffError::Invalid(format!("eps must be positive, got {eps}")));
    }
    let analytic = {
        let tape = Tape::new();
        let xv = tape.param(x.clone());
        let y = f(&tape, xv)?;
        let g = tape.grad(y, &[xv], false)?;
        g.values[0].value().as_ref().clone()
    };
    let eval = |t: Tensor| -> Result<f64> {
        let tape = Tape::new();
        let xv = tape.constant(t);
        Ok(f(&tape, xv)?.item())
    };
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
