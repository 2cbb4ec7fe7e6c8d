//! Predictive models of soil electrical resistivity (ER) from geotechnical
//! covariates: soil composition, pore-water molarity, moisture content and
//! dry unit weight.
//!
//! Four model families share one prediction contract ([`models::FittedModel`]):
//!
//! - [`linmod`]: ordinary least squares with interaction terms and a
//!   Box-Cox transformed response,
//! - [`nlsfit`]: exponential nonlinear regression fitted by Levenberg-Marquardt,
//! - [`mars`]: multivariate adaptive regression splines,
//! - [`ann`]: a single-hidden-layer feedforward network.
//!
//! [`evalcv`] compares them by repeated random holdout, and [`cli`] drives the
//! whole pipeline from a CSV file.

pub mod ann;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evalcv;
pub mod linmod;
pub mod mars;
pub mod models;
pub mod nlsfit;
pub mod svg;

pub use error::{Error, Result};
