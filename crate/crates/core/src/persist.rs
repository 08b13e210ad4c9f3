//! Little-endian binary checkpoints.
//!
//! ```text
//! "DPNT" | version u16 | kind u8 (0 = CAE, 1 = CNN)
//! config_len u32 | config bytes
//! tensor_count u32 | records...
//! record: name_len u16 | name (UTF-8) | rank u8 | extents u32 × rank | f64 × numel
//! ```
//!
//! Tied decoders are recorded by the tie flag in the config block; their
//! kernels are never written, and a tied checkpoint that carries decoder
//! kernels is rejected.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::autoencoder::{Cae, CaeActivations, CaeConfig, Encoder};
use crate::classifier::{Cnn, CnnConfig};
use crate::error::{Error, Result};
use crate::layers::{Activation, Conv2d, Deconv2d, Dense};
use crate::optim::Parameterized;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"DPNT";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Cae = 0,
    Cnn = 1,
}

/// Format-level view of a checkpoint file.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config: Vec<u8>,
    pub tensors: Vec<(String, Tensor)>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format_err(format!("truncated at byte {} (wanted {n} more)", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(format_err(format!("flag byte {b} is not 0 or 1"))),
        }
    }

    fn activation(&mut self) -> Result<Activation> {
        Activation::from_code(self.u8()?)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(format_err(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Argument(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut seen = HashSet::new();
        let mut w = Writer::default();
        w.0.extend_from_slice(&MAGIC);
        w.u16(FORMAT_VERSION);
        w.u8(self.kind as u8);
        w.u32(self.config.len())?;
        w.0.extend_from_slice(&self.config);
        w.u32(self.tensors.len())?;
        for (name, t) in &self.tensors {
            if !seen.insert(name.as_str()) {
                return Err(Error::Argument(format!("duplicate tensor name {name:?}")));
            }
            let len = u16::try_from(name.len())
                .map_err(|_| Error::Argument(format!("tensor name {name:?} too long")))?;
            w.u16(len);
            w.0.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(t.dims().len())
                .map_err(|_| Error::Argument("tensor rank exceeds 255".into()))?;
            w.u8(rank);
            for &d in t.dims() {
                w.u32(d)?;
            }
            for &v in t.data() {
                w.f64(v);
            }
        }
        Ok(w.0)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| format_err("file shorter than magic"))? != MAGIC {
            return Err(format_err("bad magic (not a checkpoint)"));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let kind = match r.u8()? {
            0 => ModelKind::Cae,
            1 => ModelKind::Cnn,
            k => return Err(format_err(format!("unknown model kind {k}"))),
        };
        let config_len = r.usize()?;
        let config = r.take(config_len)?.to_vec();
        let count = r.usize()?;
        let mut tensors = Vec::new();
        let mut seen = HashSet::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| format_err("tensor name is not UTF-8"))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(format_err(format!("duplicate tensor name {name:?}")));
            }
            let rank = r.u8()? as usize;
            let dims = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
            let numel = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| format_err("tensor extents overflow"))?;
            if numel.checked_mul(8).is_none_or(|b| b > bytes.len() - r.pos) {
                return Err(format_err(format!("payload of {name:?} truncated")));
            }
            let data = (0..numel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let t = Tensor::from_vec(&dims, data).map_err(|e| format_err(format!("{name}: {e}")))?;
            tensors.push((name, t));
        }
        r.finish()?;
        Ok(Checkpoint {
            kind,
            config,
            tensors,
        })
    }
}

/// Any model that can be checkpointed.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Cae(Cae),
    Cnn(Cnn),
}

fn named_tensors<M: Parameterized>(m: &M) -> Vec<(String, Tensor)> {
    m.param_names().into_iter().zip(m.params().into_iter().cloned()).collect()
}

fn write_encoder_config(w: &mut Writer, enc: &Encoder) -> Result<()> {
    let [c0, h, wd] = enc.input_dims();
    let (c1, c2) = (enc.conv1(), enc.conv2());
    for v in [c0, h, wd, c1.out_channels(), c2.out_channels(), c1.kernel_size()] {
        w.u32(v)?;
    }
    w.u8(c1.activation().code());
    w.u8(c2.activation().code());
    Ok(())
}

struct EncoderHeader {
    input_channels: usize,
    input_size: (usize, usize),
    channels: (usize, usize),
    kernel: usize,
    activations: (Activation, Activation),
}

fn read_encoder_config(r: &mut Reader) -> Result<EncoderHeader> {
    let input_channels = r.usize()?;
    let input_size = (r.usize()?, r.usize()?);
    let channels = (r.usize()?, r.usize()?);
    let kernel = r.usize()?;
    let activations = (r.activation()?, r.activation()?);
    Ok(EncoderHeader {
        input_channels,
        input_size,
        channels,
        kernel,
        activations,
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Cae(_) => ModelKind::Cae,
            Model::Cnn(_) => ModelKind::Cnn,
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut w = Writer::default();
        let tensors = match self {
            Model::Cae(m) => {
                let cfg = m.config();
                write_encoder_config(&mut w, m.encoder())?;
                w.u8(cfg.activations.deconv2.code());
                w.u8(cfg.activations.reconstruction.code());
                w.u8(cfg.tied_decoder as u8);
                w.f64(cfg.corruption_fraction);
                named_tensors(m)
            }
            Model::Cnn(m) => {
                let cfg = m.config();
                write_encoder_config(&mut w, m.encoder())?;
                w.u32(cfg.fc_sizes.len())?;
                for &s in &cfg.fc_sizes {
                    w.u32(s)?;
                }
                w.u32(cfg.n_classes)?;
                w.u8(cfg.freeze_encoder as u8);
                w.u8(cfg.fc_activation.code());
                named_tensors(m)
            }
        };
        Ok(Checkpoint {
            kind: self.kind(),
            config: w.0,
            tensors,
        })
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let mut r = Reader {
            bytes: &ck.config,
            pos: 0,
        };
        let enc = read_encoder_config(&mut r)?;
        let mut store: HashMap<String, Tensor> = ck.tensors.into_iter().collect();
        let mut take = |name: &str| {
            store
                .remove(name)
                .ok_or_else(|| format_err(format!("missing tensor {name:?}")))
        };
        let shape = |e: Error| format_err(e.to_string());
        let conv1 = Conv2d::new(take("encoder.conv1.weight")?, take("encoder.conv1.bias")?, enc.activations.0)
            .map_err(shape)?;
        let conv2 = Conv2d::new(take("encoder.conv2.weight")?, take("encoder.conv2.bias")?, enc.activations.1)
            .map_err(shape)?;
        if conv1.in_channels() != enc.input_channels
            || conv1.out_channels() != enc.channels.0
            || conv2.out_channels() != enc.channels.1
            || conv1.kernel_size() != enc.kernel
            || conv2.kernel_size() != enc.kernel
        {
            return Err(format_err("encoder tensors disagree with config block"));
        }
        let encoder = Encoder::new(enc.input_size, conv1, conv2).map_err(shape)?;
        let model = match ck.kind {
            ModelKind::Cae => {
                let deconv2_act = r.activation()?;
                let recon_act = r.activation()?;
                let tied = r.flag()?;
                let corruption_fraction = r.f64()?;
                r.finish()?;
                let config = CaeConfig {
                    input_channels: enc.input_channels,
                    input_size: enc.input_size,
                    conv_channels: enc.channels,
                    kernel: enc.kernel,
                    tied_decoder: tied,
                    corruption_fraction,
                    activations: CaeActivations {
                        conv1: enc.activations.0,
                        conv2: enc.activations.1,
                        deconv2: deconv2_act,
                        reconstruction: recon_act,
                    },
                };
                let b2 = take("decoder.deconv2.bias")?;
                let b1 = take("decoder.deconv1.bias")?;
                let (deconv2, deconv1) = if tied {
                    let mut d2 = Deconv2d::tied(b2.len(), deconv2_act).map_err(shape)?;
                    let mut d1 = Deconv2d::tied(b1.len(), recon_act).map_err(shape)?;
                    b2.ensure_shape(&[enc.channels.0]).map_err(shape)?;
                    b1.ensure_shape(&[enc.input_channels]).map_err(shape)?;
                    *d2.bias_mut() = b2;
                    *d1.bias_mut() = b1;
                    (d2, d1)
                } else {
                    (
                        Deconv2d::learned(take("decoder.deconv2.weight")?, b2, deconv2_act).map_err(shape)?,
                        Deconv2d::learned(take("decoder.deconv1.weight")?, b1, recon_act).map_err(shape)?,
                    )
                };
                Model::Cae(Cae::from_parts(config, encoder, deconv2, deconv1).map_err(shape)?)
            }
            ModelKind::Cnn => {
                let n_fc = r.usize()?;
                let fc_sizes = (0..n_fc).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
                let n_classes = r.usize()?;
                let freeze_encoder = r.flag()?;
                let fc_activation = r.activation()?;
                r.finish()?;
                let config = CnnConfig {
                    fc_sizes,
                    n_classes,
                    freeze_encoder,
                    fc_activation,
                };
                let mut hidden = Vec::with_capacity(n_fc);
                for i in 1..=n_fc {
                    let w = take(&format!("head.fc{i}.weight"))?;
                    let b = take(&format!("head.fc{i}.bias"))?;
                    hidden.push(Dense::new(w, b, fc_activation).map_err(shape)?);
                }
                let output = Dense::new(take("head.out.weight")?, take("head.out.bias")?, Activation::Identity)
                    .map_err(shape)?;
                Model::Cnn(Cnn::from_parts(config, encoder, hidden, output).map_err(shape)?)
            }
        };
        if let Some(extra) = store.keys().next() {
            return Err(format_err(format!("unexpected tensor {extra:?}")));
        }
        Ok(model)
    }

    pub fn into_cae(self) -> Result<Cae> {
        match self {
            Model::Cae(m) => Ok(m),
            Model::Cnn(_) => Err(format_err("checkpoint holds a CNN, not an autoencoder")),
        }
    }

    pub fn into_cnn(self) -> Result<Cnn> {
        match self {
            Model::Cnn(m) => Ok(m),
            Model::Cae(_) => Err(format_err("checkpoint holds an autoencoder, not a CNN")),
        }
    }
}

pub fn encode_model(model: &Model) -> Result<Vec<u8>> {
    model.to_checkpoint()?.encode()
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    Model::from_checkpoint(Checkpoint::decode(bytes)?)
}

/// Writes the checkpoint and returns its size in bytes.
pub fn save_checkpoint(model: &Model, path: &Path) -> Result<u64> {
    let bytes = encode_model(model)?;
    std::fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{build_cae, encoder_extract};
    use crate::classifier::build_cnn;

    fn small_cae(tied: bool) -> Cae {
        let cfg = CaeConfig {
            input_size: (8, 8),
            conv_channels: (2, 3),
            tied_decoder: tied,
            ..Default::default()
        };
        build_cae(&cfg, 17).unwrap()
    }

    #[test]
    fn header_only_for_empty_model() {
        let ck = Checkpoint {
            kind: ModelKind::Cnn,
            config: vec![],
            tensors: vec![],
        };
        let bytes = ck.encode().unwrap();
        assert_eq!(bytes.len(), 4 + 2 + 1 + 4 + 4);
        assert_eq!(&bytes[..4], b"DPNT");
        assert_eq!(Checkpoint::decode(&bytes).unwrap(), ck);
    }

    #[test]
    fn four_values_is_32_payload_bytes() {
        let t = Tensor::from_vec(&[2, 2], vec![1.0, -2.0, 0.5, 3.25]).unwrap();
        let ck = Checkpoint {
            kind: ModelKind::Cae,
            config: vec![],
            tensors: vec![("t".into(), t)],
        };
        let bytes = ck.encode().unwrap();
        let record = 2 + 1 + 1 + 2 * 4;
        assert_eq!(bytes.len(), 15 + record + 32);
        assert_eq!(&bytes[bytes.len() - 8..], &3.25f64.to_le_bytes());
    }

    #[test]
    fn roundtrip_cae_both_modes() {
        for tied in [true, false] {
            let m = Model::Cae(small_cae(tied));
            let bytes = encode_model(&m).unwrap();
            let back = decode_model(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode_model(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn tied_checkpoint_omits_decoder_kernels() {
        let ck = Model::Cae(small_cae(true)).to_checkpoint().unwrap();
        assert!(ck.tensors.iter().all(|(n, _)| !n.starts_with("decoder.") || n.ends_with(".bias")));
        let mut forged = ck.clone();
        forged.tensors.push(("decoder.deconv1.weight".into(), Tensor::zeros(&[2, 3, 5, 5]).unwrap()));
        assert!(matches!(Model::from_checkpoint(forged), Err(Error::Format(_))));
    }

    #[test]
    fn roundtrip_cnn() {
        let cae = small_cae(true);
        let cfg = CnnConfig {
            fc_sizes: vec![6, 4],
            ..Default::default()
        };
        let m = Model::Cnn(build_cnn(&encoder_extract(&cae), &cfg, 3).unwrap());
        let back = decode_model(&encode_model(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_files() {
        let mut bytes = encode_model(&Model::Cae(small_cae(true))).unwrap();
        let good = bytes.clone();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_model(&bytes), Err(Error::Format(_))));

        let mut v = good.clone();
        v[4..6].copy_from_slice(&999u16.to_le_bytes());
        assert!(matches!(decode_model(&v), Err(Error::Version { found: 999, .. })));

        for cut in [3, 10, good.len() / 2, good.len() - 1] {
            assert!(matches!(decode_model(&good[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_model(&long), Err(Error::Format(_))));
        assert!(matches!(decode_model(b""), Err(Error::Format(_))));
    }
}
