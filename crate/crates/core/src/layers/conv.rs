//! Same-padded 2-D convolution and its transpose.
//!
//! Convolution is cross-correlation (no kernel flip) with zero padding
//! `k / 2`, so spatial size is preserved. Kernels are stored as
//! `(out_channels, in_channels, k, k)`. A deconvolution keeps its kernel in
//! the layout of the encoder convolution it mirrors, which makes tying a
//! matter of reading the encoder's tensor.

use crate::data::Rng;
use crate::error::{shape_err, Error, Result};
use crate::layers::Activation;
use crate::tensor::Tensor;

/// Geometry of one correlation: channels in/out, plane size, kernel side.
#[derive(Clone, Copy, Debug)]
struct Geom {
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    k: usize,
}

impl Geom {
    fn pad(&self) -> usize {
        self.k / 2
    }

    /// Output positions `y` for which `y + d - pad` stays inside `0..n`.
    fn valid(&self, n: usize, d: usize) -> (usize, usize) {
        let p = self.pad();
        let lo = p.saturating_sub(d).min(n);
        let hi = (n + p).saturating_sub(d).min(n);
        (lo, hi.max(lo))
    }
}

/// `out[o,y,x] = Σ_{i,dy,dx} K[o,i,dy,dx] · in[i, y+dy-p, x+dx-p]`
fn correlate(input: &[f64], kernel: &[f64], g: Geom) -> Vec<f64> {
    let Geom { cin, cout, h, w, k } = g;
    let p = g.pad();
    let plane = h * w;
    let mut out = vec![0.0; cout * plane];
    for o in 0..cout {
        let out_plane = &mut out[o * plane..(o + 1) * plane];
        for i in 0..cin {
            let in_plane = &input[i * plane..(i + 1) * plane];
            for dy in 0..k {
                let (y0, y1) = g.valid(h, dy);
                for dx in 0..k {
                    let wv = kernel[((o * cin + i) * k + dy) * k + dx];
                    let (x0, x1) = g.valid(w, dx);
                    if x0 == x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let sy = y + dy - p;
                        let dst = &mut out_plane[y * w + x0..y * w + x1];
                        let src = &in_plane[sy * w + x0 + dx - p..sy * w + x1 + dx - p];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`correlate`]: scatters `g (cout,h,w)` back to `(cin,h,w)`.
fn correlate_transpose(grad: &[f64], kernel: &[f64], g: Geom) -> Vec<f64> {
    let Geom { cin, cout, h, w, k } = g;
    let p = g.pad();
    let plane = h * w;
    let mut out = vec![0.0; cin * plane];
    for o in 0..cout {
        let g_plane = &grad[o * plane..(o + 1) * plane];
        for i in 0..cin {
            let out_plane = &mut out[i * plane..(i + 1) * plane];
            for dy in 0..k {
                let (y0, y1) = g.valid(h, dy);
                for dx in 0..k {
                    let wv = kernel[((o * cin + i) * k + dy) * k + dx];
                    let (x0, x1) = g.valid(w, dx);
                    if x0 == x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let sy = y + dy - p;
                        let src = &g_plane[y * w + x0..y * w + x1];
                        let dst = &mut out_plane[sy * w + x0 + dx - p..sy * w + x1 + dx - p];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// `dK[o,i,dy,dx] = Σ_{y,x} g[o,y,x] · in[i, y+dy-p, x+dx-p]`
fn kernel_grad(grad: &[f64], input: &[f64], g: Geom) -> Vec<f64> {
    let Geom { cin, cout, h, w, k } = g;
    let p = g.pad();
    let plane = h * w;
    let mut dk = vec![0.0; cout * cin * k * k];
    for o in 0..cout {
        let g_plane = &grad[o * plane..(o + 1) * plane];
        for i in 0..cin {
            let in_plane = &input[i * plane..(i + 1) * plane];
            for dy in 0..k {
                let (y0, y1) = g.valid(h, dy);
                for dx in 0..k {
                    let (x0, x1) = g.valid(w, dx);
                    if x0 == x1 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + dy - p;
                        let a = &g_plane[y * w + x0..y * w + x1];
                        let b = &in_plane[sy * w + x0 + dx - p..sy * w + x1 + dx - p];
                        acc += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                    }
                    dk[((o * cin + i) * k + dy) * k + dx] = acc;
                }
            }
        }
    }
    dk
}

fn add_channel_bias(values: &mut [f64], bias: &[f64], plane: usize) {
    for (chunk, &b) in values.chunks_exact_mut(plane).zip(bias) {
        for v in chunk {
            *v += b;
        }
    }
}

fn channel_sums(values: &[f64], plane: usize) -> Vec<f64> {
    values.chunks_exact(plane).map(|c| c.iter().sum()).collect()
}

fn check_kernel(weight: &Tensor) -> Result<(usize, usize, usize)> {
    match *weight.dims() {
        [o, i, k1, k2] if k1 == k2 && k1 % 2 == 1 => Ok((o, i, k1)),
        _ => Err(shape_err!(
            "kernel must be (out, in, k, k) with odd k, got {}",
            weight.shape()
        )),
    }
}

/// Uniform in ±sqrt(6 / fan_in).
pub(crate) fn scaled_uniform(dims: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
    Tensor::from_vec(dims, data).expect("positive dims")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    activation: Activation,
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct ConvCache {
    input: Tensor,
    pre: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv2d {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let (o, _, _) = check_kernel(&weight)?;
        bias.ensure_shape(&[o])?;
        Ok(Conv2d {
            weight,
            bias,
            activation,
        })
    }

    /// Scaled-uniform kernel, zero bias.
    pub fn init(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel size {kernel} must be odd")));
        }
        let dims = [out_channels, in_channels, kernel, kernel];
        let weight = scaled_uniform(&dims, in_channels * kernel * kernel, rng);
        Self::new(weight, Tensor::zeros(&[out_channels])?, activation)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn kernel_size(&self) -> usize {
        self.weight.dims()[2]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut Tensor {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    /// Weight and bias, mutably.
    pub fn params_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.weight, &mut self.bias)
    }

    fn geom(&self, input: &Tensor) -> Result<Geom> {
        let (c, h, w) = input.chw()?;
        if c != self.in_channels() {
            return Err(shape_err!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            ));
        }
        Ok(Geom {
            cin: c,
            cout: self.out_channels(),
            h,
            w,
            k: self.kernel_size(),
        })
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ConvCache)> {
        let g = self.geom(input)?;
        let mut pre = correlate(input.data(), self.weight.data(), g);
        add_channel_bias(&mut pre, self.bias.data(), g.h * g.w);
        let pre = Tensor::from_vec(&[g.cout, g.h, g.w], pre)?;
        let out = self.activation.forward(&pre)?;
        Ok((
            out,
            ConvCache {
                input: input.clone(),
                pre,
            },
        ))
    }

    pub fn backward(&self, cache: &ConvCache, grad_out: &Tensor) -> Result<(Tensor, ConvGrads)> {
        let g = self.geom(&cache.input)?;
        grad_out.ensure_same_shape(&cache.pre)?;
        let gz = self.activation.backward(&cache.pre, grad_out)?;
        let grad_in = correlate_transpose(gz.data(), self.weight.data(), g);
        let dk = kernel_grad(gz.data(), cache.input.data(), g);
        let db = channel_sums(gz.data(), g.h * g.w);
        Ok((
            Tensor::from_vec(cache.input.dims(), grad_in)?,
            ConvGrads {
                weight: Tensor::from_vec(self.weight.dims(), dk)?,
                bias: Tensor::from_vec(&[g.cout], db)?,
            },
        ))
    }
}

pub fn conv2d_forward(input: &Tensor, layer: &Conv2d) -> Result<Tensor> {
    layer.forward(input).map(|(out, _)| out)
}

/// Where a deconvolution gets its kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum DeconvKernel {
    /// Transpose of the mirrored encoder convolution's kernel.
    Tied,
    /// Independent kernel, laid out like the mirrored encoder kernel.
    Learned(Tensor),
}

/// Transposed convolution mapping an encoder layer's output channels back to
/// its input channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Deconv2d {
    kernel: DeconvKernel,
    bias: Tensor,
    activation: Activation,
}

#[derive(Clone, Debug)]
pub struct DeconvCache {
    input: Tensor,
    pre: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeconvGrads {
    /// Gradient w.r.t. the effective kernel, in encoder layout. For a tied
    /// layer this belongs to the encoder's weight.
    pub kernel: Tensor,
    pub bias: Tensor,
}

impl Deconv2d {
    pub fn tied(out_channels: usize, activation: Activation) -> Result<Self> {
        Ok(Deconv2d {
            kernel: DeconvKernel::Tied,
            bias: Tensor::zeros(&[out_channels])?,
            activation,
        })
    }

    pub fn learned(kernel: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let (_, i, _) = check_kernel(&kernel)?;
        bias.ensure_shape(&[i])?;
        Ok(Deconv2d {
            kernel: DeconvKernel::Learned(kernel),
            bias,
            activation,
        })
    }

    /// Learned deconvolution mirroring a `in_channels → out_channels` encoder
    /// layer; maps `out_channels → in_channels`.
    pub fn init_learned(
        encoder_in: usize,
        encoder_out: usize,
        kernel: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let dims = [encoder_out, encoder_in, kernel, kernel];
        let k = scaled_uniform(&dims, encoder_out * kernel * kernel, rng);
        Self::learned(k, Tensor::zeros(&[encoder_in])?, activation)
    }

    pub fn is_tied(&self) -> bool {
        matches!(self.kernel, DeconvKernel::Tied)
    }

    pub fn kernel_mode(&self) -> &DeconvKernel {
        &self.kernel
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Tensor {
        &mut self.bias
    }

    pub fn out_channels(&self) -> usize {
        self.bias.len()
    }

    /// Own kernel, `None` when tied.
    pub fn learned_kernel(&self) -> Option<&Tensor> {
        match &self.kernel {
            DeconvKernel::Learned(k) => Some(k),
            DeconvKernel::Tied => None,
        }
    }

    pub fn learned_kernel_mut(&mut self) -> Option<&mut Tensor> {
        match &mut self.kernel {
            DeconvKernel::Learned(k) => Some(k),
            DeconvKernel::Tied => None,
        }
    }

    /// Own kernel (if learned) and bias, mutably.
    pub fn params_mut(&mut self) -> (Option<&mut Tensor>, &mut Tensor) {
        let kernel = match &mut self.kernel {
            DeconvKernel::Learned(k) => Some(k),
            DeconvKernel::Tied => None,
        };
        (kernel, &mut self.bias)
    }

    /// Kernel in effect: the learned one, or the tied encoder's weight.
    pub fn effective_kernel<'a>(&'a self, tied_to: Option<&'a Conv2d>) -> Result<&'a Tensor> {
        match (&self.kernel, tied_to) {
            (DeconvKernel::Learned(k), _) => Ok(k),
            (DeconvKernel::Tied, Some(enc)) => Ok(enc.weight()),
            (DeconvKernel::Tied, None) => Err(Error::Config(
                "tied deconvolution needs its encoder layer".into(),
            )),
        }
    }

    fn geom(&self, kernel: &Tensor, input: &Tensor) -> Result<Geom> {
        let (o, i, k) = check_kernel(kernel)?;
        let (c, h, w) = input.chw()?;
        if c != o {
            return Err(shape_err!("deconv expects {o} input channels, got {c}"));
        }
        if i != self.out_channels() {
            return Err(shape_err!(
                "deconv kernel produces {i} channels but bias has {}",
                self.out_channels()
            ));
        }
        // kernel "out" is the deconv input side
        Ok(Geom {
            cin: i,
            cout: o,
            h,
            w,
            k,
        })
    }

    pub fn forward(&self, input: &Tensor, tied_to: Option<&Conv2d>) -> Result<(Tensor, DeconvCache)> {
        let kernel = self.effective_kernel(tied_to)?;
        let g = self.geom(kernel, input)?;
        let mut pre = correlate_transpose(input.data(), kernel.data(), g);
        add_channel_bias(&mut pre, self.bias.data(), g.h * g.w);
        let pre = Tensor::from_vec(&[g.cin, g.h, g.w], pre)?;
        let out = self.activation.forward(&pre)?;
        Ok((
            out,
            DeconvCache {
                input: input.clone(),
                pre,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &DeconvCache,
        grad_out: &Tensor,
        tied_to: Option<&Conv2d>,
    ) -> Result<(Tensor, DeconvGrads)> {
        let kernel = self.effective_kernel(tied_to)?;
        let g = self.geom(kernel, &cache.input)?;
        grad_out.ensure_same_shape(&cache.pre)?;
        let gz = self.activation.backward(&cache.pre, grad_out)?;
        let grad_in = correlate(gz.data(), kernel.data(), g);
        let dk = kernel_grad(cache.input.data(), gz.data(), g);
        let db = channel_sums(gz.data(), g.h * g.w);
        Ok((
            Tensor::from_vec(cache.input.dims(), grad_in)?,
            DeconvGrads {
                kernel: Tensor::from_vec(kernel.dims(), dk)?,
                bias: Tensor::from_vec(&[g.cin], db)?,
            },
        ))
    }
}

pub fn deconv2d_forward(input: &Tensor, layer: &Deconv2d, tied_to: Option<&Conv2d>) -> Result<Tensor> {
    layer.forward(input, tied_to).map(|(out, _)| out)
}
