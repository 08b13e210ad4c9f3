use serde::{Deserialize, Serialize};

use crate::autoencoder::{Encoder, EncoderCache};
use crate::data::Rng;
use crate::error::{shape_err, Error, Result};
use crate::layers::{
    cross_entropy, softmax, softmax_cross_entropy_backward, Activation, Dense, DenseCache,
};
use crate::optim::{Gradients, Parameterized};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    /// Hidden fully connected widths, input side first.
    pub fc_sizes: Vec<usize>,
    pub n_classes: usize,
    pub freeze_encoder: bool,
    pub fc_activation: Activation,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            fc_sizes: vec![400, 200],
            n_classes: 3,
            freeze_encoder: false,
            fc_activation: Activation::Relu,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::Config(format!("n_classes = {}; need at least 2", self.n_classes)));
        }
        if self.fc_sizes.contains(&0) {
            return Err(Error::Config("fully connected sizes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cnn {
    config: CnnConfig,
    encoder: Encoder,
    hidden: Vec<Dense>,
    output: Dense,
}

struct CnnCache {
    encoder: EncoderCache,
    hidden: Vec<DenseCache>,
    output: DenseCache,
}

const TAG_FC: u64 = 0xFC;

/// Copies `encoder` in and draws a fresh head from `seed`.
pub fn build_cnn(encoder: &Encoder, config: &CnnConfig, seed: u64) -> Result<Cnn> {
    config.validate()?;
    encoder.validate()?;
    let mut width: usize = encoder.output_dims().iter().product();
    let mut hidden = Vec::with_capacity(config.fc_sizes.len());
    for (i, &n) in config.fc_sizes.iter().enumerate() {
        let mut rng = Rng::derive(seed, &[TAG_FC, i as u64]);
        hidden.push(Dense::init(width, n, config.fc_activation, &mut rng)?);
        width = n;
    }
    let mut rng = Rng::derive(seed, &[TAG_FC, config.fc_sizes.len() as u64]);
    let output = Dense::init(width, config.n_classes, Activation::Identity, &mut rng)?;
    Ok(Cnn {
        config: config.clone(),
        encoder: encoder.clone(),
        hidden,
        output,
    })
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Cnn {
    pub fn from_parts(config: CnnConfig, encoder: Encoder, hidden: Vec<Dense>, output: Dense) -> Result<Self> {
        config.validate()?;
        encoder.validate()?;
        if hidden.len() != config.fc_sizes.len() {
            return Err(shape_err!(
                "{} hidden layers for {} configured sizes",
                hidden.len(),
                config.fc_sizes.len()
            ));
        }
        let mut width: usize = encoder.output_dims().iter().product();
        for (layer, &n) in hidden.iter().zip(&config.fc_sizes) {
            if layer.inputs() != width || layer.outputs() != n {
                return Err(shape_err!(
                    "dense layer {}->{} where {width}->{n} was expected",
                    layer.inputs(),
                    layer.outputs()
                ));
            }
            width = n;
        }
        if output.inputs() != width || output.outputs() != config.n_classes {
            return Err(shape_err!("output layer does not match config"));
        }
        Ok(Cnn {
            config,
            encoder,
            hidden,
            output,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn hidden(&self) -> &[Dense] {
        &self.hidden
    }

    pub fn output(&self) -> &Dense {
        &self.output
    }

    /// Length of the flattened encoder output fed to the first dense layer.
    pub fn flatten_len(&self) -> usize {
        self.encoder.output_dims().iter().product()
    }

    /// Widths from the flattened features to the class scores.
    pub fn head_widths(&self) -> Vec<usize> {
        let mut w = vec![self.flatten_len()];
        w.extend(&self.config.fc_sizes);
        w.push(self.config.n_classes);
        w
    }

    fn forward_cached(&self, image: &Tensor) -> Result<(Tensor, CnnCache)> {
        let (features, encoder) = self.encoder.forward(image)?;
        let mut x = features;
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let (y, c) = layer.forward(&x)?;
            hidden.push(c);
            x = y;
        }
        let (logits, output) = self.output.forward(&x)?;
        Ok((logits, CnnCache { encoder, hidden, output }))
    }

    pub fn logits(&self, image: &Tensor) -> Result<Tensor> {
        self.forward_cached(image).map(|(l, _)| l)
    }

    /// Class probabilities.
    pub fn forward(&self, image: &Tensor) -> Result<Tensor> {
        Ok(softmax(&self.logits(image)?))
    }

    pub fn predict(&self, image: &Tensor) -> Result<usize> {
        Ok(argmax(self.forward(image)?.data()))
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.config.n_classes {
            return Err(Error::Data(format!(
                "label {label} out of range 0..{}",
                self.config.n_classes
            )));
        }
        Ok(())
    }

    pub fn loss(&self, image: &Tensor, label: usize) -> Result<f64> {
        self.check_label(label)?;
        cross_entropy(&self.forward(image)?, label)
    }

    /// Cross-entropy, class probabilities, and parameter gradients.
    pub fn loss_and_grad(&self, image: &Tensor, label: usize) -> Result<(f64, Tensor, Gradients)> {
        self.check_label(label)?;
        let (logits, cache) = self.forward_cached(image)?;
        let probs = softmax(&logits);
        let loss = cross_entropy(&probs, label)?;
        let g = softmax_cross_entropy_backward(&probs, label)?;
        let (mut g, out_grads) = self.output.backward(&cache.output, &g)?;
        let mut head = vec![out_grads.bias, out_grads.weight];
        for (layer, c) in self.hidden.iter().zip(&cache.hidden).rev() {
            let (gi, lg) = layer.backward(c, &g)?;
            head.push(lg.bias);
            head.push(lg.weight);
            g = gi;
        }
        let g = g.reshape(&self.encoder.output_dims())?;
        let (_, enc) = self.encoder.backward(&cache.encoder, &g)?;
        let mut grads = vec![enc.conv1.weight, enc.conv1.bias, enc.conv2.weight, enc.conv2.bias];
        // head grads were pushed output-first as (bias, weight)
        head.reverse();
        grads.extend(head);
        Ok((loss, probs, Gradients(grads)))
    }

    /// Number of leading parameter tensors that belong to the encoder.
    pub const ENCODER_PARAMS: usize = 4;
}

impl Parameterized for Cnn {
    fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Encoder::PARAM_NAMES.iter().map(|s| s.to_string()).collect();
        for i in 0..self.hidden.len() {
            names.push(format!("head.fc{}.weight", i + 1));
            names.push(format!("head.fc{}.bias", i + 1));
        }
        names.push("head.out.weight".into());
        names.push("head.out.bias".into());
        names
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        for l in self.hidden.iter().chain(std::iter::once(&self.output)) {
            p.push(l.weight());
            p.push(l.bias());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        for l in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            let (w, b) = l.params_mut();
            p.push(w);
            p.push(b);
        }
        p
    }
}
