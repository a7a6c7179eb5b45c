//! Semiclassical Landau-level predictions for magnetic Schrödinger operators
//! `H_p = (1/p)(i∇ + pA)² + V` and their verification against sparse
//! Peierls discretizations.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretize;
pub mod error;
pub mod expr;
pub mod harness;
pub mod model;
pub mod predictor;
pub mod reduce;
pub mod spectral;

pub use error::{Error, Result};
pub use harness::{fit_power_law, ldos_check, run_sweep, ExperimentConfig, ExperimentReport, Tolerances};
pub use model::{sample_fields, validate_model, Domain, FieldSamples, Grid, ModelConfig, ModelSpec, ValidationReport};
pub use predictor::{
    k_set, sigma_bands, weyl_count_prediction, KSetField, LandauBandSet, MultiIndex, TestFunction, WeylPrediction,
};
