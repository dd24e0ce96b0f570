use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

/// Plain steepest descent: no momentum, no weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self { learning_rate })
    }
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1 }
    }
}

/// `p <- p - lr * g` for every parameter.
pub fn sgd_step(params: &mut [&mut Tensor], grads: &[Tensor], cfg: &SgdConfig) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::InvalidTensor(format!(
            "sgd_step: {} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if let Some((p, g)) = params.iter().zip(grads).find(|(p, g)| p.shape() != g.shape()) {
        return Err(shape_err("sgd_step", &[p.shape(), g.shape()]));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= cfg.learning_rate * d;
        }
    }
    Ok(())
}
