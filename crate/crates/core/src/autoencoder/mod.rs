//! The convolutional autoencoder, its denoising corruption, and
//! unsupervised pretraining.

mod encoder;
mod model;
mod pretrain;

pub use encoder::{Encoder, EncoderCache, EncoderGrads, EncoderStage};
pub use model::{
    build_cae, corrupt, corruption_count, corruption_rng, encoder_extract, reconstruction_loss,
    Cae, CaeActivations, CaeCache, CaeConfig, CorruptionMask, ShapeChain,
};
pub use pretrain::{pretrain, write_pretrain_log, PretrainEpoch};
