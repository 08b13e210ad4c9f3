use std::fmt;

use serde::{Deserialize, Serialize};

use crate::autoencoder::encoder::{Encoder, EncoderCache};
use crate::data::Rng;
use crate::error::{Error, Result};
use crate::layers::{
    unpool2x2_backward, unpool2x2_forward, Activation, Conv2d, Deconv2d, DeconvCache,
};
use crate::optim::{Gradients, Parameterized};
use crate::tensor::Tensor;

/// Per-layer nonlinearities of the autoencoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaeActivations {
    pub conv1: Activation,
    pub conv2: Activation,
    pub deconv2: Activation,
    pub reconstruction: Activation,
}

impl Default for CaeActivations {
    fn default() -> Self {
        CaeActivations {
            conv1: Activation::Relu,
            conv2: Activation::Relu,
            deconv2: Activation::Relu,
            reconstruction: Activation::Sigmoid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaeConfig {
    pub input_channels: usize,
    /// (height, width); both divisible by 4.
    pub input_size: (usize, usize),
    pub conv_channels: (usize, usize),
    pub kernel: usize,
    pub tied_decoder: bool,
    pub corruption_fraction: f64,
    pub activations: CaeActivations,
}

impl Default for CaeConfig {
    fn default() -> Self {
        CaeConfig {
            input_channels: 3,
            input_size: (256, 256),
            conv_channels: (100, 200),
            kernel: 5,
            tied_decoder: true,
            corruption_fraction: 0.2,
            activations: CaeActivations::default(),
        }
    }
}

impl CaeConfig {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_size;
        if h == 0 || w == 0 || h % 4 != 0 || w % 4 != 0 {
            return Err(Error::Config(format!(
                "input size {h}x{w} must be positive and divisible by 4"
            )));
        }
        if self.input_channels == 0 || self.conv_channels.0 == 0 || self.conv_channels.1 == 0 {
            return Err(Error::Config("channel counts must be at least 1".into()));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel {} must be odd", self.kernel)));
        }
        if !(0.0..=1.0).contains(&self.corruption_fraction) {
            return Err(Error::Config(format!(
                "corruption fraction {} outside [0, 1]",
                self.corruption_fraction
            )));
        }
        Ok(())
    }

    /// Every intermediate shape from input to reconstruction.
    pub fn shape_chain(&self) -> ShapeChain {
        let (h, w) = self.input_size;
        let (c1, c2) = self.conv_channels;
        let c0 = self.input_channels;
        ShapeChain(vec![
            ("input", [c0, h, w]),
            ("conv1", [c1, h, w]),
            ("pool1", [c1, h / 2, w / 2]),
            ("conv2", [c2, h / 2, w / 2]),
            ("pool2", [c2, h / 4, w / 4]),
            ("unpool2", [c2, h / 2, w / 2]),
            ("deconv2", [c1, h / 2, w / 2]),
            ("unpool1", [c1, h, w]),
            ("deconv1", [c0, h, w]),
        ])
    }
}

/// Named (c, h, w) shapes along a forward pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeChain(pub Vec<(&'static str, [usize; 3])>);

impl ShapeChain {
    pub fn dims(&self) -> Vec<[usize; 3]> {
        self.0.iter().map(|(_, d)| *d).collect()
    }
}

impl fmt::Display for ShapeChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(_, [c, h, w])| format!("{c}x{h}x{w}"))
            .collect();
        write!(f, "{}", parts.join(" -> "))
    }
}

/// Convolutional autoencoder: the encoder stack mirrored by unpooling and
/// deconvolution. Decoder unpooling reuses the switches of the mirrored
/// encoder pooling layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Cae {
    config: CaeConfig,
    encoder: Encoder,
    /// c2 → c1, mirrors conv2.
    deconv2: Deconv2d,
    /// c1 → input channels, mirrors conv1.
    deconv1: Deconv2d,
}

#[derive(Clone, Debug)]
pub struct CaeCache {
    encoder: EncoderCache,
    deconv2: DeconvCache,
    deconv1: DeconvCache,
}

// stream tags for seeded initialization
const TAG_CONV1: u64 = 1;
const TAG_CONV2: u64 = 2;
const TAG_DECONV2: u64 = 3;
const TAG_DECONV1: u64 = 4;

pub fn build_cae(config: &CaeConfig, seed: u64) -> Result<Cae> {
    config.validate()?;
    let (c1, c2) = config.conv_channels;
    let (c0, k, a) = (config.input_channels, config.kernel, config.activations);
    let conv1 = Conv2d::init(c0, c1, k, a.conv1, &mut Rng::derive(seed, &[TAG_CONV1]))?;
    let conv2 = Conv2d::init(c1, c2, k, a.conv2, &mut Rng::derive(seed, &[TAG_CONV2]))?;
    let (deconv2, deconv1) = if config.tied_decoder {
        (Deconv2d::tied(c1, a.deconv2)?, Deconv2d::tied(c0, a.reconstruction)?)
    } else {
        (
            Deconv2d::init_learned(c1, c2, k, a.deconv2, &mut Rng::derive(seed, &[TAG_DECONV2]))?,
            Deconv2d::init_learned(c0, c1, k, a.reconstruction, &mut Rng::derive(seed, &[TAG_DECONV1]))?,
        )
    };
    Ok(Cae {
        config: config.clone(),
        encoder: Encoder::new(config.input_size, conv1, conv2)?,
        deconv2,
        deconv1,
    })
}

impl Cae {
    /// Reassembles a model from parts, checking them against `config`.
    pub fn from_parts(config: CaeConfig, encoder: Encoder, deconv2: Deconv2d, deconv1: Deconv2d) -> Result<Self> {
        config.validate()?;
        let (c1, c2) = config.conv_channels;
        let dims_ok = encoder.input_dims() == [config.input_channels, config.input_size.0, config.input_size.1]
            && encoder.conv1().out_channels() == c1
            && encoder.conv2().out_channels() == c2
            && encoder.conv1().kernel_size() == config.kernel
            && deconv2.out_channels() == c1
            && deconv1.out_channels() == config.input_channels
            && deconv2.is_tied() == config.tied_decoder
            && deconv1.is_tied() == config.tied_decoder;
        if !dims_ok {
            return Err(Error::Shape("autoencoder parts disagree with config".into()));
        }
        let model = Cae {
            config,
            encoder,
            deconv2,
            deconv1,
        };
        // shape-check learned kernels with one probe pass
        if !model.config.tied_decoder {
            let probe = Tensor::zeros(&model.encoder.input_dims())?;
            model.forward(&probe)?;
        }
        Ok(model)
    }

    pub fn config(&self) -> &CaeConfig {
        &self.config
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn encoder_mut(&mut self) -> &mut Encoder {
        &mut self.encoder
    }

    pub fn deconv2(&self) -> &Deconv2d {
        &self.deconv2
    }

    pub fn deconv1(&self) -> &Deconv2d {
        &self.deconv1
    }

    pub fn shape_chain(&self) -> ShapeChain {
        self.config.shape_chain()
    }

    fn tie<'a>(&self, conv: &'a Conv2d) -> Option<&'a Conv2d> {
        self.config.tied_decoder.then_some(conv)
    }

    /// Reconstruction plus everything the backward pass needs.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, CaeCache)> {
        let (code, enc) = self.encoder.forward(input)?;
        let u2 = unpool2x2_forward(&code, &enc.pool2)?;
        let (d2, deconv2) = self.deconv2.forward(&u2, self.tie(&self.encoder.conv2))?;
        let u1 = unpool2x2_forward(&d2, &enc.pool1)?;
        let (y, deconv1) = self.deconv1.forward(&u1, self.tie(&self.encoder.conv1))?;
        Ok((
            y,
            CaeCache {
                encoder: enc,
                deconv2,
                deconv1,
            },
        ))
    }

    pub fn reconstruct(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input).map(|(y, _)| y)
    }

    /// Parameter gradients given dL/d(reconstruction).
    pub fn backward(&self, cache: &CaeCache, grad_recon: &Tensor) -> Result<Gradients> {
        let conv1 = &self.encoder.conv1;
        let conv2 = &self.encoder.conv2;
        let (g, d1) = self.deconv1.backward(&cache.deconv1, grad_recon, self.tie(conv1))?;
        let g = unpool2x2_backward(&g, &cache.encoder.pool1)?;
        let (g, d2) = self.deconv2.backward(&cache.deconv2, &g, self.tie(conv2))?;
        let g = unpool2x2_backward(&g, &cache.encoder.pool2)?;
        let (_, mut enc) = self.encoder.backward(&cache.encoder, &g)?;
        let mut grads = Vec::with_capacity(8);
        if self.config.tied_decoder {
            enc.conv1.weight.add_scaled(1.0, &d1.kernel)?;
            enc.conv2.weight.add_scaled(1.0, &d2.kernel)?;
        }
        grads.extend([enc.conv1.weight, enc.conv1.bias, enc.conv2.weight, enc.conv2.bias]);
        grads.extend([d2.bias, d1.bias]);
        if !self.config.tied_decoder {
            grads.extend([d2.kernel, d1.kernel]);
        }
        Ok(Gradients(grads))
    }

    /// Loss of reconstructing `clean` from `seen`, and its gradient.
    pub fn loss_and_grad(&self, seen: &Tensor, clean: &Tensor) -> Result<(f64, Gradients)> {
        let (y, cache) = self.forward(seen)?;
        let loss = reconstruction_loss(&y, clean)?;
        let n = y.len() as f64;
        let grad = Tensor::axpy(-1.0, clean, &y)?.map(|d| 2.0 * d / n)?;
        Ok((loss, self.backward(&cache, &grad)?))
    }

    pub fn loss(&self, seen: &Tensor, clean: &Tensor) -> Result<f64> {
        reconstruction_loss(&self.reconstruct(seen)?, clean)
    }
}

impl Parameterized for Cae {
    fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Encoder::PARAM_NAMES.iter().map(|s| s.to_string()).collect();
        names.push("decoder.deconv2.bias".into());
        names.push("decoder.deconv1.bias".into());
        if !self.config.tied_decoder {
            names.push("decoder.deconv2.weight".into());
            names.push("decoder.deconv1.weight".into());
        }
        names
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        p.push(self.deconv2.bias());
        p.push(self.deconv1.bias());
        p.extend(self.deconv2.learned_kernel());
        p.extend(self.deconv1.learned_kernel());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        let (k2, b2) = self.deconv2.params_mut();
        let (k1, b1) = self.deconv1.params_mut();
        p.push(b2);
        p.push(b1);
        p.extend(k2);
        p.extend(k1);
        p
    }
}

/// Per-element mean squared error.
pub fn reconstruction_loss(reconstruction: &Tensor, clean: &Tensor) -> Result<f64> {
    Ok(Tensor::frobenius_sq_dist(reconstruction, clean)? / reconstruction.len() as f64)
}

/// Pixel locations whose every channel was zeroed, sorted row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorruptionMask(pub Vec<(usize, usize)>);

impl CorruptionMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Number of pixels removed from an `h × w` image.
pub fn corruption_count(fraction: f64, h: usize, w: usize) -> usize {
    (fraction * (h * w) as f64).round() as usize
}

/// Zeroes `round(fraction · H · W)` distinct pixels, all channels.
pub fn corrupt(image: &Tensor, fraction: f64, rng: &mut Rng) -> Result<(Tensor, CorruptionMask)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("corruption fraction {fraction} outside [0, 1]")));
    }
    let (c, h, w) = image.chw()?;
    let count = corruption_count(fraction, h, w).min(h * w);
    let mut picked = rng.sample_without_replacement(h * w, count);
    picked.sort_unstable();
    let mut out = image.clone();
    let d = out.data_mut();
    for &p in &picked {
        for ch in 0..c {
            d[ch * h * w + p] = 0.0;
        }
    }
    let mask = picked.into_iter().map(|p| (p / w, p % w)).collect();
    Ok((out, CorruptionMask(mask)))
}

const TAG_CORRUPT: u64 = 0xC0;

/// Generator for the mask of image `index` in `epoch`.
pub fn corruption_rng(seed: u64, epoch: usize, index: usize) -> Rng {
    Rng::derive(seed, &[TAG_CORRUPT, epoch as u64, index as u64])
}

/// Copy of the encoder (items up to the second pooling layer).
pub fn encoder_extract(model: &Cae) -> Encoder {
    model.encoder.clone()
}
