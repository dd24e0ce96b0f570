use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of `f` against central finite differences.
///
/// Returns `max |g_ad - g_fd| / max(1, |g_fd|)` over every coordinate of every
/// parameter.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], step: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = f(&tape, &vars)?.value();
        if !out.is_scalar() {
            return Err(Error::NonScalarRoot(out.shape().to_vec()));
        }
        let v = out.item();
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("objective evaluated to {v}")));
        }
        Ok(v)
    };

    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let root = f(&tape, &vars)?;
        let v = root.value().item();
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("objective evaluated to {v}")));
        }
        let grads = tape.backward(root)?;
        vars.iter().map(|&v| grads.wrt(v)).collect()
    };

    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, g_ad) in analytic.iter().enumerate() {
        for k in 0..work[pi].len() {
            let orig = work[pi].data()[k];
            work[pi].data_mut()[k] = orig + step;
            let up = eval(&work)?;
            work[pi].data_mut()[k] = orig - step;
            let down = eval(&work)?;
            work[pi].data_mut()[k] = orig;
            let g_fd = (up - down) / (2.0 * step);
            let err = (g_ad.data()[k] - g_fd).abs() / g_fd.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
