use std::fmt;

use crate::error::{shape_err, Result};
use crate::layers::{maxpool2x2_backward, maxpool2x2_forward, Conv2d, ConvCache, ConvGrads, PoolSwitches};
use crate::tensor::Tensor;

/// One stage of the convolutional feature extractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderStage {
    Input { channels: usize, height: usize, width: usize },
    Conv { in_channels: usize, out_channels: usize, kernel: usize },
    MaxPool2x2,
}

/// Convolution, pooling, convolution, pooling. Shared verbatim between the
/// autoencoder and the classifier it initializes.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    input_size: (usize, usize),
    pub(crate) conv1: Conv2d,
    pub(crate) conv2: Conv2d,
}

#[derive(Clone, Debug)]
pub struct EncoderCache {
    pub(crate) conv1: ConvCache,
    pub(crate) pool1: PoolSwitches,
    pub(crate) conv2: ConvCache,
    pub(crate) pool2: PoolSwitches,
}

#[derive(Clone, Debug)]
pub struct EncoderGrads {
    pub conv1: ConvGrads,
    pub conv2: ConvGrads,
}

impl Encoder {
    pub fn new(input_size: (usize, usize), conv1: Conv2d, conv2: Conv2d) -> Result<Self> {
        let enc = Encoder {
            input_size,
            conv1,
            conv2,
        };
        enc.validate()?;
        Ok(enc)
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_size;
        if h == 0 || w == 0 || h % 4 != 0 || w % 4 != 0 {
            return Err(shape_err!("encoder input {h}x{w} must be a positive multiple of 4"));
        }
        if self.conv1.out_channels() != self.conv2.in_channels() {
            return Err(shape_err!(
                "conv1 emits {} channels but conv2 expects {}",
                self.conv1.out_channels(),
                self.conv2.in_channels()
            ));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        self.conv1.in_channels()
    }

    pub fn input_size(&self) -> (usize, usize) {
        self.input_size
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [self.input_channels(), self.input_size.0, self.input_size.1]
    }

    pub fn output_dims(&self) -> [usize; 3] {
        [self.conv2.out_channels(), self.input_size.0 / 4, self.input_size.1 / 4]
    }

    pub fn conv1(&self) -> &Conv2d {
        &self.conv1
    }

    pub fn conv2(&self) -> &Conv2d {
        &self.conv2
    }

    pub fn conv1_mut(&mut self) -> &mut Conv2d {
        &mut self.conv1
    }

    pub fn conv2_mut(&mut self) -> &mut Conv2d {
        &mut self.conv2
    }

    /// Input contract followed by conv, pool, conv, pool.
    pub fn stages(&self) -> Vec<EncoderStage> {
        let conv = |c: &Conv2d| EncoderStage::Conv {
            in_channels: c.in_channels(),
            out_channels: c.out_channels(),
            kernel: c.kernel_size(),
        };
        vec![
            EncoderStage::Input {
                channels: self.input_channels(),
                height: self.input_size.0,
                width: self.input_size.1,
            },
            conv(&self.conv1),
            EncoderStage::MaxPool2x2,
            conv(&self.conv2),
            EncoderStage::MaxPool2x2,
        ]
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, EncoderCache)> {
        input.ensure_shape(&self.input_dims())?;
        let (a1, conv1) = self.conv1.forward(input)?;
        let (p1, pool1) = maxpool2x2_forward(&a1)?;
        let (a2, conv2) = self.conv2.forward(&p1)?;
        let (p2, pool2) = maxpool2x2_forward(&a2)?;
        Ok((
            p2,
            EncoderCache {
                conv1,
                pool1,
                conv2,
                pool2,
            },
        ))
    }

    pub fn encode(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input).map(|(t, _)| t)
    }

    pub fn backward(&self, cache: &EncoderCache, grad_out: &Tensor) -> Result<(Tensor, EncoderGrads)> {
        let g = maxpool2x2_backward(grad_out, &cache.pool2)?;
        let (g, conv2) = self.conv2.backward(&cache.conv2, &g)?;
        let g = maxpool2x2_backward(&g, &cache.pool1)?;
        let (g, conv1) = self.conv1.backward(&cache.conv1, &g)?;
        Ok((g, EncoderGrads { conv1, conv2 }))
    }

    pub(crate) fn params(&self) -> Vec<&Tensor> {
        vec![self.conv1.weight(), self.conv1.bias(), self.conv2.weight(), self.conv2.bias()]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let (w1, b1) = self.conv1.params_mut();
        let (w2, b2) = self.conv2.params_mut();
        vec![w1, b1, w2, b2]
    }

    pub(crate) const PARAM_NAMES: [&'static str; 4] = [
        "encoder.conv1.weight",
        "encoder.conv1.bias",
        "encoder.conv2.weight",
        "encoder.conv2.bias",
    ];
}

impl fmt::Display for EncoderStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EncoderStage::Input { channels, height, width } => write!(f, "input {channels}x{height}x{width}"),
            EncoderStage::Conv { in_channels, out_channels, kernel } => {
                write!(f, "conv {in_channels}->{out_channels} {kernel}x{kernel}")
            }
            EncoderStage::MaxPool2x2 => write!(f, "maxpool 2x2"),
        }
    }
}
