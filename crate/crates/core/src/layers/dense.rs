use crate::data::Rng;
use crate::error::{shape_err, Result};
use crate::layers::conv::scaled_uniform;
use crate::layers::Activation;
use crate::tensor::Tensor;

/// Fully connected layer `σ(Wx + b)` with `W` stored as (out, in).
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    weight: Tensor,
    bias: Tensor,
    activation: Activation,
}

#[derive(Clone, Debug)]
pub struct DenseCache {
    input: Tensor,
    pre: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let out = match *weight.dims() {
            [o, _] => o,
            _ => return Err(shape_err!("dense weight must be (out, in), got {}", weight.shape())),
        };
        bias.ensure_shape(&[out])?;
        Ok(Dense {
            weight,
            bias,
            activation,
        })
    }

    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        let weight = scaled_uniform(&[outputs, inputs], inputs, rng);
        Self::new(weight, Tensor::zeros(&[outputs])?, activation)
    }

    pub fn inputs(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.dims()[0]
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

    pub fn params_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        (&mut self.weight, &mut self.bias)
    }

    /// Input of any shape is read as a flat vector of length `inputs()`.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        let (m, n) = (self.outputs(), self.inputs());
        if input.len() != n {
            return Err(shape_err!("dense expects {n} inputs, got {}", input.len()));
        }
        let x = input.data();
        let w = self.weight.data();
        let pre: Vec<f64> = (0..m)
            .map(|r| {
                let row = &w[r * n..(r + 1) * n];
                self.bias.data()[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let pre = Tensor::from_vec(&[m], pre)?;
        let out = self.activation.forward(&pre)?;
        Ok((
            out,
            DenseCache {
                input: input.clone(),
                pre,
            },
        ))
    }

    pub fn backward(&self, cache: &DenseCache, grad_out: &Tensor) -> Result<(Tensor, DenseGrads)> {
        let (m, n) = (self.outputs(), self.inputs());
        grad_out.ensure_same_shape(&cache.pre)?;
        let gz = self.activation.backward(&cache.pre, grad_out)?;
        let w = self.weight.data();
        let x = cache.input.data();
        let mut grad_in = vec![0.0; n];
        let mut dw = vec![0.0; m * n];
        for (r, &g) in gz.data().iter().enumerate() {
            let row = &w[r * n..(r + 1) * n];
            for (gi, &wv) in grad_in.iter_mut().zip(row) {
                *gi += wv * g;
            }
            for (d, &xv) in dw[r * n..(r + 1) * n].iter_mut().zip(x) {
                *d = g * xv;
            }
        }
        Ok((
            Tensor::from_vec(cache.input.dims(), grad_in)?,
            DenseGrads {
                weight: Tensor::from_vec(&[m, n], dw)?,
                bias: gz,
            },
        ))
    }
}

pub fn dense_forward(input: &Tensor, layer: &Dense) -> Result<Tensor> {
    layer.forward(input).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Tensor {
        Tensor::from_vec(&[x.len()], x.to_vec()).unwrap()
    }

    fn m(r: usize, c: usize, x: &[f64]) -> Tensor {
        Tensor::from_vec(&[r, c], x.to_vec()).unwrap()
    }

    #[test]
    fn identity_weights() {
        let d = Dense::new(m(2, 2, &[1.0, 0.0, 0.0, 1.0]), v(&[0.0, 0.0]), Activation::Identity).unwrap();
        assert_eq!(dense_forward(&v(&[0.3, -4.0]), &d).unwrap().data(), &[0.3, -4.0]);
    }

    #[test]
    fn row_sum_plus_bias() {
        let d = Dense::new(m(1, 2, &[1.0, 1.0]), v(&[1.0]), Activation::Identity).unwrap();
        assert_eq!(dense_forward(&v(&[2.0, 3.0]), &d).unwrap().data(), &[6.0]);
    }

    #[test]
    fn relu_clamps() {
        let d = Dense::new(m(2, 2, &[1.0, 0.0, 0.0, 1.0]), v(&[0.0, 0.0]), Activation::Relu).unwrap();
        assert_eq!(dense_forward(&v(&[-1.0, 2.0]), &d).unwrap().data(), &[0.0, 2.0]);
    }

    #[test]
    fn length_mismatch() {
        let d = Dense::new(m(1, 2, &[1.0, 1.0]), v(&[1.0]), Activation::Identity).unwrap();
        assert!(dense_forward(&v(&[1.0, 2.0, 3.0]), &d).is_err());
        assert!(Dense::new(m(1, 2, &[1.0, 1.0]), v(&[1.0, 2.0]), Activation::Identity).is_err());
    }

    #[test]
    fn identity_backward_is_transpose_product() {
        let w = [1.0, 2.0, 3.0, 4.0];
        let d = Dense::new(m(2, 2, &w), v(&[0.5, -0.5]), Activation::Identity).unwrap();
        let (_, cache) = d.forward(&v(&[0.1, 0.2])).unwrap();
        let g = [0.7, -1.1];
        let (gi, gp) = d.backward(&cache, &v(&g)).unwrap();
        // Wᵀg by hand
        let expected = [w[0] * g[0] + w[2] * g[1], w[1] * g[0] + w[3] * g[1]];
        for (a, e) in gi.data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(gp.bias.data(), &g);
        let (gi, gp) = d.backward(&cache, &v(&[0.0, 0.0])).unwrap();
        assert!(gi.data().iter().chain(gp.weight.data()).all(|&x| x == 0.0));
    }
}
