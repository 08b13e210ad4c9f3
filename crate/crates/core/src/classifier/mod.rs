//! Supervised CNN: a transferred encoder followed by fully connected layers
//! and a softmax output, trained with cross-entropy.

mod finetune;
mod model;

pub use finetune::{finetune, write_finetune_log, FinetuneEpoch};
pub use model::{argmax, build_cnn, Cnn, CnnConfig};
