//! Symbolic regression by multi-objective genetic programming.

pub mod data;
pub mod engine;
pub mod error;
pub mod expr;
pub mod itea;
pub mod moo;
pub mod optim;
pub mod profile;
pub mod scalar;
pub mod select;
pub mod simplify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tree = expr::TreeNode<f64>;
pub type Dataset = data::Dataset<f64>;
pub type FeatureMatrix = data::FeatureMatrix<f64>;
