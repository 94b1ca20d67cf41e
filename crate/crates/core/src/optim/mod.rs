//! Parameter fitting: closed-form least squares, Levenberg-Marquardt and the
//! fitted-parameter memo.

mod cache;
mod linalg;
mod lm;
mod ols;

pub use cache::{CacheOutcome, Fitted, ParamCache};
pub use lm::{lm_fit, lm_fit_with_jacobian, LmConfig, LmFit};
pub use ols::{ols_fit, LinearSystem, RIDGE};
