//! Bayesian state-space estimation, diagnosis and forecasting of the
//! Lee-Carter model and its cohort extensions.
//!
//! Log death rates are modelled as a linear-Gaussian state-space system
//! whose state holds the period factor and, for the cohort models, a vector
//! of cohort factors indexed by age. The posterior is explored with a Gibbs
//! sampler that draws the latent path by forward-filtering-backward-sampling
//! and the static parameters from their conjugate conditionals.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod forecast;
pub mod gibbs;
pub mod lgssm;
pub mod linalg;
pub mod model;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use gibbs::{run_chain, Draw, PosteriorChain, SamplerConfig};
pub use model::{
    AgeYearWindow, DataPanel, Hyperpriors, ModelKind, ModelSpec, StatePath, StaticParams,
    SystemMatrices,
};
