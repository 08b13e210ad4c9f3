use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pointwise nonlinearity applied after a layer's affine part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`. Relu uses 0 at the kink.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn forward(self, pre: &Tensor) -> Result<Tensor> {
        pre.map(|z| self.apply(z))
    }

    /// Upstream gradient times σ'(pre), elementwise.
    pub fn backward(self, pre: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        pre.ensure_same_shape(grad_out)?;
        let data = pre
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&z, &g)| g * self.derivative(z))
            .collect();
        Tensor::from_vec(pre.dims(), data)
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Sigmoid),
            2 => Ok(Activation::Identity),
            c => Err(Error::Format(format!("unknown activation code {c}"))),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
