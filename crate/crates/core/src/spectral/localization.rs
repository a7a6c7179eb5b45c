//! Exponential localization of eigenfunctions near `K_[α,β]`, and the
//! distance of computed eigenvalues from the band set.

use serde::{Deserialize, Serialize};

use super::slice::Eigenpair;
use crate::predictor::{KSetField, LandauBandSet};

/// Default window of normalized distance `t = √p d` for the decay fit.
pub const FIT_WINDOW: (f64, f64) = (0.5, 3.0);
/// Tail masses below this are excluded from the fit.
pub const MASS_FLOOR: f64 = 1e-14;
const FIT_SAMPLES: usize = 26;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairLocalization {
    pub value: f64,
    /// `(c, M(c))` with `M(c) = Σ e^{2c√p d(x)} |u(x)|²`.
    pub weighted_masses: Vec<(f64, f64)>,
    /// `(t, T(t))` with `T(t)` the mass at normalized distance `√p d >= t`.
    pub tail_masses: Vec<(f64, f64)>,
    /// Decay rate in normalized distance: `T(t) ~ e^{-2 ĉ t}`.
    pub c_hat: Option<f64>,
    /// Decay rate in physical distance, `ĉ √p`.
    pub rate: Option<f64>,
    /// Mass on nodes with infinite distance (empty `K`).
    pub excluded_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub p: f64,
    pub pairs: Vec<PairLocalization>,
}

impl LocalizationReport {
    /// Smallest fitted normalized rate over all pairs.
    pub fn min_c_hat(&self) -> Option<f64> {
        self.pairs.iter().filter_map(|r| r.c_hat).reduce(f64::min)
    }

    /// Smallest fitted physical rate over all pairs.
    pub fn min_rate(&self) -> Option<f64> {
        self.pairs.iter().filter_map(|r| r.rate).reduce(f64::min)
    }
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Weighted masses for each `c` in `c_ladder` and the fitted decay rate of
/// the tail mass, using the fit window [`FIT_WINDOW`].
pub fn localization_metrics(pairs: &[Eigenpair], kset: &KSetField, p: f64, c_ladder: &[f64]) -> LocalizationReport {
    localization_metrics_in(pairs, kset, p, c_ladder, FIT_WINDOW)
}

pub fn localization_metrics_in(
    pairs: &[Eigenpair],
    kset: &KSetField,
    p: f64,
    c_ladder: &[f64],
    window: (f64, f64),
) -> LocalizationReport {
    let sp = p.sqrt();
    let out = pairs
        .iter()
        .map(|pair| {
            assert_eq!(
                pair.vector.len(),
                kset.distance.len(),
                "eigenvector and grid differ in size"
            );
            let weights: Vec<f64> = pair.vector.iter().map(|u| u.norm_sqr()).collect();
            let total: f64 = weights.iter().sum();
            let mut excluded = 0.0;
            let mut finite: Vec<(f64, f64)> = Vec::with_capacity(weights.len());
            for (&w, &d) in weights.iter().zip(&kset.distance) {
                if d.is_finite() {
                    finite.push((sp * d, w / total));
                } else {
                    excluded += w / total;
                }
            }
            let weighted_masses = c_ladder
                .iter()
                .map(|&c| (c, finite.iter().map(|(t, w)| (2.0 * c * t).exp() * w).sum()))
                .collect();
            finite.sort_by(|a, b| b.0.total_cmp(&a.0));
            // Tail masses at the sample points, accumulated from the far end.
            let ts: Vec<f64> = (0..FIT_SAMPLES)
                .map(|k| window.0 + (window.1 - window.0) * k as f64 / (FIT_SAMPLES - 1) as f64)
                .collect();
            let mut tail_masses = Vec::with_capacity(ts.len());
            let mut acc = 0.0;
            let mut idx = 0;
            for &t in ts.iter().rev() {
                while idx < finite.len() && finite[idx].0 >= t {
                    acc += finite[idx].1;
                    idx += 1;
                }
                tail_masses.push((t, acc));
            }
            tail_masses.reverse();
            let usable: Vec<(f64, f64)> = tail_masses
                .iter()
                .filter(|(_, m)| *m >= MASS_FLOOR)
                .map(|&(t, m)| (t, m.ln()))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
            let c_hat = if xs.len() >= 3 {
                slope(&xs, &ys).map(|s| -0.5 * s)
            } else {
                None
            };
            PairLocalization {
                value: pair.value,
                weighted_masses,
                tail_masses,
                c_hat,
                rate: c_hat.map(|c| c * sp),
                excluded_mass: excluded,
            }
        })
        .collect();
    LocalizationReport { p, pairs: out }
}

/// Largest distance from an eigenvalue `<= k_max` to the band set; 0 when
/// every such eigenvalue lies inside a band.
pub fn cluster_distance(eigs: &[f64], bands: &LandauBandSet, k_max: f64) -> f64 {
    eigs.iter()
        .filter(|&&l| l <= k_max)
        .map(|&l| bands.distance(l))
        .fold(0.0, f64::max)
}
