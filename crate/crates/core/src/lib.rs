//! Convolutional autoencoder pretraining with max-location unpooling, and
//! transfer of the pretrained encoder into a supervised CNN classifier.
//!
//! All numerics are `f64`, every backward pass is written by hand, and all
//! randomness flows from seeded splitmix64 streams, so runs are bit-for-bit
//! reproducible for a given seed regardless of thread count.

pub mod autoencoder;
pub mod classifier;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod metrics;
pub mod optim;
pub mod persist;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Shape, Tensor};
