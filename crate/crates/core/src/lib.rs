//! Uncertainty quantification for technical systems whose computer models
//! are imperfect.
//!
//! The crate covers the whole workflow: synthesising additional inputs
//! ([`randgen`]), fitting penalised least-squares surrogates with a residual
//! correction learned from experiments ([`surrogate`]), density and quantile
//! estimation on surrogate outputs ([`density`]), three ways of quantifying
//! the model error ([`model_error`]), and confidence intervals for quantiles
//! and confidence bands for densities ([`confidence`]). [`synthetic`]
//! provides test systems whose true output law is known in closed form.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod randgen;
pub mod rng;
pub mod density;
pub mod surrogate;
pub mod model_error;
pub mod confidence;
pub mod synthetic;
mod optimize;

pub use error::{Result, UqError};
