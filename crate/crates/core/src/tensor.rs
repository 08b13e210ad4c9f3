//! Dense row-major `f64` tensors.
//!
//! Images use the (channels, height, width) convention. Tensors carry no
//! autograd state; every layer writes its own backward pass.

use std::fmt;

use crate::error::{shape_err, Error, Result};

/// Ordered list of strictly positive extents.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(shape_err!("shape must have at least one extent"));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(shape_err!("extent {d} in {dims:?} is not positive"));
        }
        Ok(Shape(dims.to_vec()))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], fill: f64) -> Result<Self> {
        let shape = Shape::new(shape)?;
        let data = vec![fill; shape.numel()];
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, 0.0)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(shape)?;
        if shape.numel() != data.len() {
            return Err(shape_err!(
                "{} values do not fill shape {shape} ({} elements)",
                data.len(),
                shape.numel()
            ));
        }
        Ok(Tensor { shape, data })
    }

    /// Zero tensor with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Same values under a new shape with the same element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    /// (channels, height, width) of a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match *self.dims() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(shape_err!("expected a rank-3 (c,h,w) tensor, got {}", self.shape)),
        }
    }

    pub fn ensure_shape(&self, expected: &[usize]) -> Result<()> {
        if self.dims() != expected {
            return Err(shape_err!("expected shape {expected:?}, got {}", self.shape));
        }
        Ok(())
    }

    pub fn ensure_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_err!("shape mismatch: {} vs {}", self.shape, other.shape));
        }
        Ok(())
    }

    /// Elementwise image under `f`; fails if any output is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "map produced {} at flat index {i} (input {})",
                data[i], self.data[i]
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// `a * x + y`, elementwise.
    pub fn axpy(a: f64, x: &Tensor, y: &Tensor) -> Result<Self> {
        x.ensure_same_shape(y)?;
        let data = x.data.iter().zip(&y.data).map(|(&xi, &yi)| a * xi + yi).collect();
        Ok(Tensor {
            shape: x.shape.clone(),
            data,
        })
    }

    /// In-place `self += a * x`.
    pub fn add_scaled(&mut self, a: f64, x: &Tensor) -> Result<()> {
        self.ensure_same_shape(x)?;
        for (s, &xi) in self.data.iter_mut().zip(&x.data) {
            *s += a * xi;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    /// Compensated sum of all elements.
    pub fn sum(&self) -> f64 {
        compensated_sum(self.data.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Σ(aᵢ − bᵢ)².
    pub fn frobenius_sq_dist(a: &Tensor, b: &Tensor) -> Result<f64> {
        a.ensure_same_shape(b)?;
        Ok(compensated_sum(a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y))))
    }
}

/// Neumaier summation. Losses are sums of many similar terms whose rounding
/// would otherwise dominate finite-difference estimates.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

pub fn tensor_new(shape: &[usize], fill: f64) -> Result<Tensor> {
    Tensor::new(shape, fill)
}

pub fn tensor_map(t: &Tensor, f: impl Fn(f64) -> f64) -> Result<Tensor> {
    t.map(f)
}

pub fn tensor_axpy(a: f64, x: &Tensor, y: &Tensor) -> Result<Tensor> {
    Tensor::axpy(a, x, y)
}

pub fn frobenius_sq_dist(a: &Tensor, b: &Tensor) -> Result<f64> {
    Tensor::frobenius_sq_dist(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compensated_sum_recovers_lost_bits() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(v), 2.0);
        let tenth = std::iter::repeat_n(0.1, 10);
        assert_eq!(compensated_sum(tenth), 1.0);
    }

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(&[v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn new_fills() {
        let z = tensor_new(&[2, 2], 0.0).unwrap();
        assert_eq!(z.dims(), &[2, 2]);
        assert_eq!(z.data(), &[0.0; 4]);
        assert_eq!(tensor_new(&[1], 5.5).unwrap().data(), &[5.5]);
    }

    #[test]
    fn zero_extent_is_shape_error() {
        assert!(matches!(tensor_new(&[0], 0.0), Err(Error::Shape(_))));
        assert!(matches!(tensor_new(&[3, 0, 2], 1.0), Err(Error::Shape(_))));
        assert!(matches!(tensor_new(&[], 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn map_cases() {
        assert_eq!(tensor_map(&t(&[1.0, -2.0]), f64::abs).unwrap().data(), &[1.0, 2.0]);
        assert_eq!(tensor_map(&t(&[0.0, 0.0]), |x| x).unwrap().data(), &[0.0, 0.0]);
        assert_eq!(tensor_map(&t(&[3.0]), |x| x * x).unwrap().data(), &[9.0]);
    }

    #[test]
    fn map_rejects_non_finite() {
        let r = tensor_map(&t(&[0.0, 1.0]), |x| 1.0 / x);
        assert!(matches!(r, Err(Error::Numeric(_))));
        let r = tensor_map(&t(&[-1.0]), f64::sqrt);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn axpy_cases() {
        let x = t(&[7.0, -1.0]);
        let y = t(&[3.0, 4.0]);
        assert_eq!(tensor_axpy(0.0, &x, &y).unwrap(), y);
        assert_eq!(tensor_axpy(1.0, &t(&[1.0, 2.0]), &y).unwrap().data(), &[4.0, 6.0]);
        assert!(matches!(
            tensor_axpy(2.0, &t(&[1.0]), &t(&[0.0, 0.0])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn sq_dist_cases() {
        let a = t(&[1.5, -2.0, 0.25]);
        assert_eq!(frobenius_sq_dist(&a, &a).unwrap(), 0.0);
        assert_eq!(frobenius_sq_dist(&t(&[1.0, 0.0]), &t(&[0.0, 1.0])).unwrap(), 2.0);
        assert_eq!(frobenius_sq_dist(&t(&[3.0]), &t(&[1.0])).unwrap(), 4.0);
        assert!(frobenius_sq_dist(&t(&[3.0]), &t(&[1.0, 2.0])).is_err());
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..32).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3f64..1e3, n),
                prop::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn axpy_onto_zero_is_exact_scaling(a in -10f64..10.0, v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let x = t(&v);
            let z = tensor_new(x.dims(), 0.0).unwrap();
            let r = tensor_axpy(a, &x, &z).unwrap();
            for (ri, xi) in r.data().iter().zip(x.data()) {
                prop_assert_eq!(*ri, a * xi);
            }
        }

        #[test]
        fn sq_dist_symmetric_non_negative((a, b) in vec_pair()) {
            let (a, b) = (t(&a), t(&b));
            let ab = frobenius_sq_dist(&a, &b).unwrap();
            let ba = frobenius_sq_dist(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn map_identity_is_identity(v in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let x = Tensor::from_vec(&[1, v.len()], v).unwrap();
            prop_assert_eq!(tensor_map(&x, |x| x).unwrap(), x);
        }
    }
}
