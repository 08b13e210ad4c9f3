use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// A model whose learnable tensors can be enumerated in a fixed order.
pub trait Parameterized {
    /// Names aligned with [`Parameterized::params`]; unique within a model.
    fn param_names(&self) -> Vec<String>;
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

/// One gradient tensor per parameter, in the model's parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn zeros_for<M: Parameterized + ?Sized>(model: &M) -> Self {
        Gradients(model.params().iter().map(|t| t.zeros_like()).collect())
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.0
    }

    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(shape_err!(
                "gradient sets differ in length: {} vs {}",
                self.0.len(),
                other.0.len()
            ));
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_scaled(1.0, b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.0 {
            t.scale(s);
        }
    }

    /// Element-wise sum, accumulated in slice order.
    pub fn sum_in_order(parts: &[Gradients]) -> Result<Option<Gradients>> {
        let mut iter = parts.iter();
        let Some(first) = iter.next() else {
            return Ok(None);
        };
        let mut total = first.clone();
        for g in iter {
            total.accumulate(g)?;
        }
        Ok(Some(total))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.data().iter().all(|&v| v == 0.0))
    }
}
