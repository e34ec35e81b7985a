//! Assumed-effect-size selection for online experiment power analysis.
//!
//! Estimators learn a default effect size from a corpus of past experiments:
//! a random-effects pooled mean, ordinary and heteroscedastic Gaussian
//! mixtures fitted by penalized EM, and a utility-maximizing grid search.
//! [`simulation`] reproduces synthetic corpora and [`evaluation`] compares
//! the estimators on them.

pub mod cli;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod meta_models;
pub mod seed;
pub mod simulation;
pub mod utility;

pub use error::{Error, Result};
