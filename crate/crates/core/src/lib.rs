//! Ensemble classifiers whose members see different dimension-reduced
//! views of the training set: diffusion maps with Nyström extension,
//! random projections and random subspaces, plus bagging and AdaBoost.M1
//! baselines and a cross-validation/rank-statistics harness.

pub mod data;
pub mod dimred;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod inducers;
pub mod linalg;

pub use error::{Error, Result};
