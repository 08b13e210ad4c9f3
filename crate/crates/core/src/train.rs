//! Minibatch plumbing shared by pretraining and fine-tuning.
//!
//! Per-sample gradients may be computed on any number of threads; they are
//! always summed in sample order so results do not depend on the pool size.

use rayon::prelude::*;

use crate::data::Rng;
use crate::error::Result;
use crate::optim::Gradients;

const TAG_ORDER: u64 = 0x0D;

/// Sample visiting order for one epoch.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derive(seed, &[TAG_ORDER, epoch as u64]).shuffle(&mut order);
    order
}

/// Per-sample outcome of a forward/backward pass.
pub struct SampleResult<X> {
    pub loss: f64,
    pub grads: Gradients,
    pub extra: X,
}

/// Runs `f` over `batch` (in parallel) and returns the losses, extras, and
/// batch-mean gradient, reduced in batch order.
pub fn batch_mean<X, F>(batch: &[usize], f: F) -> Result<(Vec<f64>, Vec<X>, Gradients)>
where
    X: Send,
    F: Fn(usize) -> Result<SampleResult<X>> + Sync,
{
    let results: Vec<SampleResult<X>> = batch.par_iter().map(|&i| f(i)).collect::<Result<_>>()?;
    let mut losses = Vec::with_capacity(results.len());
    let mut extras = Vec::with_capacity(results.len());
    let mut total: Option<Gradients> = None;
    for r in results {
        losses.push(r.loss);
        extras.push(r.extra);
        match &mut total {
            None => total = Some(r.grads),
            Some(t) => t.accumulate(&r.grads)?,
        }
    }
    let mut total = total.expect("non-empty batch");
    total.scale(1.0 / batch.len() as f64);
    Ok((losses, extras, total))
}
