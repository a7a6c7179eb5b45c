//! Declarative p-sweeps comparing measured spectra with the semiclassical
//! predictions, plus power-law fits and report output.

pub mod config;
pub mod dump;
pub mod fit;
pub mod ldos;
pub mod report;
pub mod sweep;
pub mod tolerances;

pub use config::{Check, ExperimentConfig, GridRule, ModelSource, PhiSpec};
pub use dump::{read_grid_dump, write_grid_dump};
pub use fit::{fit_power_law, PowerLawFit};
pub use ldos::{ldos_check, LdosReport, LdosRow};
pub use report::{ExperimentReport, FitRecord, SweepRow, Verdict};
pub use sweep::run_sweep;
pub use tolerances::Tolerances;
