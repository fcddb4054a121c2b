//! Interpretable mass appraisal of real estate.
//!
//! The crate covers the whole modelling chain for price-per-square-meter
//! targets: record ingest, robust outlier cleaning, spatial and road-network
//! features, feature selection, OLS with diagnostics, regression-kriging,
//! RuleFit, a random-forest baseline, and cross-validated evaluation.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geostat;
pub mod linalg;
pub mod linmodel;
pub mod outliers;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod rulefit;
pub mod selection;
pub mod serde_ext;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
