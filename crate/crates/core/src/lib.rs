//! Bayesian variable selection for linear and logistic regression.
//!
//! This crate fits spike-and-slab regression models with a fully factorized
//! variational approximation. Coordinate ascent is run independently at every
//! point of a hyperparameter grid, and the per-point fits are combined by
//! normalized evidence lower bounds. The crate provides:
//!
//! - the model-averaging driver [`fit`] over a [`HyperGrid`],
//! - per-family coordinate ascent engines ([`linear`], [`logistic`]),
//! - Bayes factors, inclusion probabilities and variance-explained summaries,
//! - out-of-sample prediction ([`predict`]),
//! - brute-force reference posteriors for validation ([`oracle`]),
//! - a binary archive format and a command-line front-end ([`cli`]).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod linear;
pub mod logistic;
pub mod math;
pub mod model;
pub mod oracle;
pub mod predict;

pub use dataset::{Dataset, Family};
pub use error::{Error, Result};
pub use fit::{bayes_factor, fit, normalize_weights, FitOptions};
pub use grid::{default_logodds, parse_grid_spec, HyperGrid, HyperSetting, LogOddsGrid};
pub use model::{GridFit, ModelFit, VariationalState};
