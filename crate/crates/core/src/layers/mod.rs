//! Forward and backward passes for every layer kind in the autoencoder and
//! the classifier. Each layer's `forward` returns a cache that its
//! `backward` consumes.

mod activation;
mod conv;
mod dense;
mod pool;
mod softmax;

pub use activation::Activation;
pub use conv::{
    conv2d_forward, deconv2d_forward, Conv2d, ConvCache, ConvGrads, Deconv2d, DeconvCache,
    DeconvGrads, DeconvKernel,
};
pub use dense::{dense_forward, Dense, DenseCache, DenseGrads};
pub use pool::{
    maxpool2x2_backward, maxpool2x2_forward, unpool2x2_backward, unpool2x2_forward, PoolSwitches,
};
pub use softmax::{cross_entropy, softmax, softmax_cross_entropy_backward, PROB_FLOOR};
