use std::io::Write;

use crate::classifier::model::{argmax, Cnn};
use crate::error::{Error, Result};
use crate::optim::{lr_at_epoch, sgd_step_tensors, Parameterized, SgdConfig};
use crate::tensor::Tensor;
use crate::train::{batch_mean, epoch_order, SampleResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinetuneEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    /// Accuracy of the end-of-epoch model on the training set.
    pub train_accuracy: f64,
}

/// Minibatch SGD on cross-entropy. With `freeze_encoder`, only the fully
/// connected head is updated.
pub fn finetune(
    model: &mut Cnn,
    train: &[(Tensor, usize)],
    opt: &SgdConfig,
    epochs: usize,
    seed: u64,
) -> Result<Vec<FinetuneEpoch>> {
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    opt.validate()?;
    let n_classes = model.config().n_classes;
    if let Some((_, l)) = train.iter().find(|(_, l)| *l >= n_classes) {
        return Err(Error::Data(format!("label {l} out of range 0..{n_classes}")));
    }
    let skip = if model.config().freeze_encoder {
        Cnn::ENCODER_PARAMS
    } else {
        0
    };
    let mut log = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let lr = lr_at_epoch(opt, epoch as i64)?;
        let order = epoch_order(seed, epoch, train.len());
        let mut loss_sum = 0.0;
        for batch in order.chunks(opt.batch_size) {
            let m = &*model;
            let (losses, _, grads) = batch_mean(batch, |i| {
                let (image, label) = &train[i];
                let (loss, _, grads) = m.loss_and_grad(image, *label)?;
                Ok(SampleResult { loss, grads, extra: () })
            })?;
            loss_sum += losses.iter().sum::<f64>();
            let params: Vec<&mut Tensor> = model.params_mut().into_iter().skip(skip).collect();
            sgd_step_tensors(params, &grads.tensors()[skip..], lr)?;
        }
        let correct = training_hits(model, train)?;
        log.push(FinetuneEpoch {
            epoch,
            learning_rate: lr,
            mean_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
        });
    }
    Ok(log)
}

fn training_hits(model: &Cnn, train: &[(Tensor, usize)]) -> Result<usize> {
    use rayon::prelude::*;
    let hits: Vec<bool> = train
        .par_iter()
        .map(|(x, l)| Ok(argmax(model.forward(x)?.data()) == *l))
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().filter(|&h| h).count())
}

pub fn write_finetune_log(log: &[FinetuneEpoch], mut out: impl Write) -> Result<()> {
    writeln!(out, "epoch,learning_rate,mean_loss,train_accuracy")?;
    for row in log {
        writeln!(
            out,
            "{},{},{},{}",
            row.epoch, row.learning_rate, row.mean_loss, row.train_accuracy
        )?;
    }
    Ok(())
}
