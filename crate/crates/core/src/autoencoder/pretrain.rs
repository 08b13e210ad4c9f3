use std::io::Write;

use crate::autoencoder::model::{corrupt, corruption_rng, Cae};
use crate::error::{Error, Result};
use crate::optim::{lr_at_epoch, sgd_step, SgdConfig};
use crate::tensor::Tensor;
use crate::train::{batch_mean, epoch_order, SampleResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
}

/// Denoising pretraining: every epoch each image gets a fresh corruption
/// mask, and the model learns to reconstruct the clean image from it.
pub fn pretrain(
    model: &mut Cae,
    dataset: &[Tensor],
    opt: &SgdConfig,
    epochs: usize,
    seed: u64,
) -> Result<Vec<PretrainEpoch>> {
    if dataset.is_empty() {
        return Err(Error::Data("pretraining set is empty".into()));
    }
    opt.validate()?;
    let expected = model.encoder().input_dims();
    if let Some(i) = dataset.iter().position(|t| t.dims() != expected) {
        return Err(Error::Data(format!(
            "image {i} has shape {} but the model expects {expected:?}",
            dataset[i].shape()
        )));
    }
    let fraction = model.config().corruption_fraction;
    let mut log = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let lr = lr_at_epoch(opt, epoch as i64)?;
        let order = epoch_order(seed, epoch, dataset.len());
        let mut loss_sum = 0.0;
        for batch in order.chunks(opt.batch_size) {
            let m = &*model;
            let (losses, _, grads) = batch_mean(batch, |i| {
                let clean = &dataset[i];
                let (seen, _) = corrupt(clean, fraction, &mut corruption_rng(seed, epoch, i))?;
                let (loss, grads) = m.loss_and_grad(&seen, clean)?;
                Ok(SampleResult { loss, grads, extra: () })
            })?;
            loss_sum += losses.iter().sum::<f64>();
            sgd_step(model, &grads, lr)?;
        }
        log.push(PretrainEpoch {
            epoch,
            learning_rate: lr,
            mean_loss: loss_sum / dataset.len() as f64,
        });
    }
    Ok(log)
}

pub fn write_pretrain_log(log: &[PretrainEpoch], mut out: impl Write) -> Result<()> {
    writeln!(out, "epoch,learning_rate,mean_loss")?;
    for row in log {
        writeln!(out, "{},{},{}", row.epoch, row.learning_rate, row.mean_loss)?;
    }
    Ok(())
}
