//! Eigenvalue counts by matrix inertia, eigenpairs in intervals, spectral
//! traces and eigenfunction localization.

pub(crate) mod dense;
pub mod eigs;
pub mod ldl;
pub mod localization;
pub mod nested;
pub mod slice;
pub mod trace;

pub use eigs::{eigenpairs_in_interval, eigenpairs_with, EigsOptions};
pub use localization::{cluster_distance, localization_metrics, LocalizationReport, PairLocalization};
pub use nested::Analysis;
pub use slice::{count_interval, inertia, Eigenpair, ShiftRecord, SliceMethod, Slicer, SpectralSlice};
pub use trace::{trace_phi, TraceMethod, TraceResult};
