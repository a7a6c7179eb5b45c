//! Pass/fail thresholds shared by sweep verdicts and the acceptance tests.

use serde::{Deserialize, Serialize};

/// Every threshold used to judge a sweep, with its default.
///
/// Fields may be overridden individually in the `tolerances` section of an
/// experiment config; omitted fields keep their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest `|N_measured / N_predicted - 1|` at the largest `p` (0.10).
    pub weyl_ratio: f64,
    /// Weyl deviations must be non-increasing for `p` at or above this (16).
    pub weyl_monotone_from: u32,
    /// Largest admissible fitted exponent of the trace relative error (-0.4).
    pub trace_exponent: f64,
    /// Largest admissible fitted exponent of the cluster distance (-0.25).
    pub cluster_exponent: f64,
    /// Smallest admissible R² of the cluster-distance fit (0.9).
    pub cluster_r_squared: f64,
    /// Admissible range of the decay-rate ratio between the largest and
    /// smallest `p` of a localization sweep ([1.6, 2.4]).
    pub localization_ratio: (f64, f64),
    /// Admissible change of the gap count under domain enlargement (0).
    pub enlargement_count_change: usize,
    /// Relative agreement of spectra in two gauges (1e-9).
    pub gauge_relative: f64,
    /// `max N/p^n` over `min N/p^n` must stay below this (2).
    pub cpn_variation: f64,
    /// Largest node-averaged LDOS deviation at the largest `p` (0.05).
    pub ldos_deviation: f64,
    /// Residual bound `‖Hu - λu‖` for eigenpairs (1e-8).
    pub eigen_residual: f64,
    /// Stand-in for an exactly zero quantity in a log-log fit (1e-8).
    pub resolution_floor: f64,
    /// Smallest margin, in magnetic lengths, a domain rule may use (5).
    pub min_margin_lengths: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            weyl_ratio: 0.10,
            weyl_monotone_from: 16,
            trace_exponent: -0.4,
            cluster_exponent: -0.25,
            cluster_r_squared: 0.9,
            localization_ratio: (1.6, 2.4),
            enlargement_count_change: 0,
            gauge_relative: 1e-9,
            cpn_variation: 2.0,
            ldos_deviation: 0.05,
            eigen_residual: 1e-8,
            resolution_floor: 1e-8,
            min_margin_lengths: 5.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_override_keeps_defaults() {
        let t: Tolerances = serde_json::from_str(r#"{"weyl_ratio": 0.2}"#).unwrap();
        assert_eq!(t.weyl_ratio, 0.2);
        assert_eq!(t.cluster_exponent, -0.25);
        assert!(serde_json::from_str::<Tolerances>(r#"{"nope": 1}"#).is_err());
    }
}
