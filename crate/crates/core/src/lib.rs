//! Artificial Bee Colony wrapper feature selection for NIR-spectra regression.
//!
//! The optimizer searches feature subsets; each candidate is scored by the
//! k-fold cross-validated RMSE of an ANFIS or neural-network regressor plus a
//! per-feature penalty.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abc;
pub mod anfis;
pub mod ann;
pub mod dataset;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod regressor;
pub mod rng;
