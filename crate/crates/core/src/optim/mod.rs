//! Parameter enumeration, SGD with the geometric learning-rate schedule, and
//! the finite-difference gradient oracle.

mod check;
mod params;
mod sgd;

pub use check::{grad_check, relative_error, GradCheckReport, REL_ERR_FLOOR};
pub use params::{Gradients, Parameterized};
pub use sgd::{lr_at_epoch, sgd_step, sgd_step_tensors, SgdConfig};
