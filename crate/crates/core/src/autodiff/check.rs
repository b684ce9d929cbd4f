use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar function against central
/// differences with step `h`.
///
/// Returns the largest per-coordinate relative error
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn finite_diff_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::Contract(format!("step h must be positive, got {h}")));
    }
    let mut leaf = x.clone();
    leaf.set_requires_grad(true);

    let mut tape = Tape::new();
    let xv = tape.leaf(&leaf);
    let out = f(&mut tape, xv)?;
    let grads = tape.backward(out)?;
    let zeros = vec![0.0; x.len()];
    let analytic = grads.wrt(xv).unwrap_or(&zeros);

    let eval = |values: Vec<f64>| -> Result<f64> {
        let probe = Tensor::new(x.shape(), values)?;
        let mut tape = Tape::new();
        let v = tape.leaf(&probe);
        let out = f(&mut tape, v)?;
        tape.item(out)
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.values().to_vec();
        let mut minus = x.values().to_vec();
        plus[i] += h;
        minus[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
