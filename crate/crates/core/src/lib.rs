//! Sequence design by proxy-guided local search with a GFlowNet-style policy.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the scalar type for the common cases.

mod error;

pub mod activeloop;
pub mod config;
pub mod dataset;
pub mod deltacs;
pub mod gfnpolicy;
pub mod oracle;
pub mod proxy;
pub mod rankprior;
pub mod seeds;
pub mod seqcore;

pub use error::{DcsError, Result};
pub use ndgrad::Scalar;

pub type Dataset = dataset::LabeledDataset<f64>;
pub type Proxy = proxy::EnsembleProxy<f64>;
pub type Policy = gfnpolicy::PolicyModel<f64>;
pub type Trainer = gfnpolicy::PolicyTrainer<f64>;
pub type Nk = oracle::NkLandscape<f64>;
pub type Run = activeloop::Experiment<f64>;

pub type Dataset32 = dataset::LabeledDataset<f32>;
pub type Proxy32 = proxy::EnsembleProxy<f32>;
pub type Policy32 = gfnpolicy::PolicyModel<f32>;
pub type Trainer32 = gfnpolicy::PolicyTrainer<f32>;
pub type Nk32 = oracle::NkLandscape<f32>;
pub type Run32 = activeloop::Experiment<f32>;
