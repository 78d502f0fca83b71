//! Active-subspace uncertainty quantification for expensive black-box
//! simulations with a one-dimensional ridge structure.
//!
//! The pipeline runs from a bounded [`ParameterSpace`] through a sampled
//! [`Campaign`], a least-squares [`ActiveSubspace`] direction with bootstrap
//! spread, a [`QuadraticSurrogate`] of the active variable, and the
//! range, safe-set and CDF estimates in [`uq`].

pub mod active_subspace;
pub mod campaign;
pub mod error;
pub mod hyshot;
pub mod linalg;
pub mod param_space;
pub mod rng;
pub mod surrogate;
pub mod uq;

pub use active_subspace::{ActiveSubspace, BootstrapEnsemble};
pub use campaign::{Campaign, Evaluator, RunRecord, RunStatus};
pub use error::{Error, ErrorClass, Result};
pub use param_space::{ParameterSpace, ParameterSpec};
pub use surrogate::QuadraticSurrogate;
