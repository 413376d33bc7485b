//! Persistent-homology feature extraction for point clouds, a from-scratch
//! random-forest regressor, and observational (cohort-based) attribution of
//! the resulting pipeline.
//!
//! Data flows through the modules in this order:
//!
//! * [`geometry`]: point clouds, XYZ files, synthetic structures, grids.
//! * [`persistence`]: Vietoris–Rips filtrations and Z/2 persistence.
//! * [`vectorize`]: blurred (birth, persistence) histograms as features.
//! * [`forest`]: CART regression forest and feature importances.
//! * [`xai`]: Cohort Shapley and integrated-gradients cohort Shapley.
//! * [`explain`]: pixel, parameter, grid and higher-order explanations.
//!
//! [`pipeline`] composes the first four into a cloud-to-prediction scorer.

pub mod error;
pub mod explain;
pub mod forest;
pub mod geometry;
pub mod persistence;
pub mod pipeline;
pub mod vectorize;
pub mod xai;

pub use error::{Error, Result};
