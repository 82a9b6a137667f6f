//! Shapley-value explanations for graph neural network predictions.

pub mod datasets;
pub mod error;
pub mod eval;
pub mod explain;
pub mod gnn;
pub mod graph;
pub mod masks;
pub mod perturb;
pub mod registry;
pub mod tensor;

pub use error::{Error, Result};
