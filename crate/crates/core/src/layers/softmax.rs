use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probability floor applied before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Max-subtracted exponential normalization.
pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs = exps.into_iter().map(|e| e / total).collect();
    Tensor::from_vec(logits.dims(), probs).expect("same shape")
}

/// `-ln(max(probs[target], 1e-12))`.
pub fn cross_entropy(probs: &Tensor, target: usize) -> Result<f64> {
    let p = probs.data().get(target).ok_or_else(|| {
        Error::Index(format!("target class {target} out of range 0..{}", probs.len()))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Gradient of cross-entropy w.r.t. the logits: `probs − one_hot(target)`.
pub fn softmax_cross_entropy_backward(probs: &Tensor, target: usize) -> Result<Tensor> {
    if target >= probs.len() {
        return Err(Error::Index(format!(
            "target class {target} out of range 0..{}",
            probs.len()
        )));
    }
    let mut g = probs.clone();
    g.data_mut()[target] -= 1.0;
    Ok(g)
}
