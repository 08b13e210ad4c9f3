//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::optim::{Gradients, Parameterized};

/// Denominator floor for relative errors.
pub const REL_ERR_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares `analytic` against `(f(θ+ε) − f(θ−ε)) / 2ε` for every parameter
/// element of `model`.
pub fn grad_check<M, F>(model: &M, loss: F, analytic: &Gradients, eps: f64) -> Result<GradCheckReport>
where
    M: Parameterized + Clone,
    F: Fn(&M) -> Result<f64>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    let names = model.param_names();
    let shapes: Vec<_> = model.params().iter().map(|t| t.shape().clone()).collect();
    if analytic.tensors().len() != shapes.len()
        || analytic.tensors().iter().zip(&shapes).any(|(g, s)| g.shape() != s)
    {
        return Err(Error::Shape("analytic gradients do not match parameters".into()));
    }
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (p, name) in names.iter().enumerate() {
        for j in 0..shapes[p].numel() {
            let orig = probe.params()[p].data()[j];
            probe.params_mut()[p].data_mut()[j] = orig + eps;
            let up = loss(&probe)?;
            probe.params_mut()[p].data_mut()[j] = orig - eps;
            let down = loss(&probe)?;
            probe.params_mut()[p].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(analytic.tensors()[p].data()[j], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((name.clone(), j));
            }
        }
    }
    Ok(report)
}
