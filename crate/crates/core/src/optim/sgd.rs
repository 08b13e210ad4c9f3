use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::optim::{Gradients, Parameterized};
use crate::tensor::Tensor;

/// Plain minibatch SGD with a geometric per-epoch learning-rate decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr0: f64,
    pub decay: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr0: 0.01,
            decay: 0.98,
            batch_size: 16,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay must be in (0, 1], got {}", self.decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `lr0 · decay^epoch`, epochs counted from 0.
pub fn lr_at_epoch(cfg: &SgdConfig, epoch: i64) -> Result<f64> {
    if epoch < 0 {
        return Err(Error::Argument(format!("epoch {epoch} is negative")));
    }
    let exp = i32::try_from(epoch).map_err(|_| Error::Argument(format!("epoch {epoch} too large")))?;
    Ok(cfg.lr0 * cfg.decay.powi(exp))
}

/// `p ← p − lr·g` for aligned tensor lists.
pub fn sgd_step_tensors(params: Vec<&mut Tensor>, grads: &[Tensor], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(shape_err!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        ));
    }
    if let Some((p, g)) = params.iter().zip(grads).find(|(p, g)| p.shape() != g.shape()) {
        return Err(shape_err!("parameter {} vs gradient {}", p.shape(), g.shape()));
    }
    for (p, g) in params.into_iter().zip(grads) {
        p.add_scaled(-lr, g)?;
    }
    Ok(())
}

pub fn sgd_step<M: Parameterized + ?Sized>(model: &mut M, grads: &Gradients, lr: f64) -> Result<()> {
    sgd_step_tensors(model.params_mut(), grads.tensors(), lr)
}
