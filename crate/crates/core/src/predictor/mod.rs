//! Semiclassical predictions built from the frozen fields: local Landau
//! levels, band sets and gaps, the sets `K_[a,b]`, Liouville (Weyl) measures,
//! the Weyl count and the leading trace coefficient.

pub mod bands;
pub mod frame;
pub mod kset;
pub mod weyl;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use bands::{sigma_bands, Band, LandauBandSet};
pub use frame::frame_eigenvalues;
pub use kset::{k_set, KSetField};
pub use weyl::{f0_pairing, local_f0, weyl_count_prediction, weyl_measure, WeylPrediction, WeylWarning};

/// `k = (k_1, ..., k_n)` with nonnegative entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u64 {
        self.0.iter().map(|&k| k as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// `Λ_k = Σ_j (2 k_j + 1) a_j + V`.
pub fn landau_level(a: &[f64], v: f64, k: &MultiIndex) -> f64 {
    debug_assert_eq!(a.len(), k.len());
    a.iter()
        .zip(&k.0)
        .map(|(a, &k)| (2.0 * k as f64 + 1.0) * a)
        .sum::<f64>()
        + v
}

/// Largest `|k|` with `(2|k| + n) a_min + v_min <= energy`, if any.
pub fn max_degree(n: usize, a_min: f64, v_min: f64, energy: f64) -> Option<u64> {
    let bound = (energy - v_min) / (2.0 * a_min) - n as f64 / 2.0;
    if bound < 0.0 || !bound.is_finite() {
        return None;
    }
    Some(bound.floor() as u64)
}

/// All multi-indices of length `n` with `|k| <= max_degree`, in graded
/// lexicographic order: by degree, then lexicographically ascending.
pub fn multi_indices(n: usize, max_degree: u64) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        let mut current = vec![0u32; n];
        compositions(degree, 0, &mut current, &mut out);
    }
    out
}

fn compositions(remaining: u64, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining as u32;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for k in 0..=remaining {
        current[pos] = k as u32;
        compositions(remaining - k, pos + 1, current, out);
    }
}

/// Smooth bump `φ(λ) = exp(1 - 1/(1 - t²))`, `t = (2λ - α - β)/(β - α)`,
/// supported in `[α, β]` with maximum 1 at the midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub alpha: f64,
    pub beta: f64,
}

impl TestFunction {
    pub fn bump(alpha: f64, beta: f64) -> TestFunction {
        assert!(alpha < beta, "bump support must be a nonempty interval");
        TestFunction { alpha, beta }
    }

    fn t(&self, lambda: f64) -> f64 {
        (2.0 * lambda - self.alpha - self.beta) / (self.beta - self.alpha)
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let t = self.t(lambda);
        if t.abs() >= 1.0 {
            return 0.0;
        }
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        let t = self.t(lambda);
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t * t;
        let dphi_dt = (1.0 - 1.0 / s).exp() * (-2.0 * t / (s * s));
        dphi_dt * 2.0 / (self.beta - self.alpha)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// Upper bound of `|φ'|`.
    pub fn derivative_bound(&self) -> f64 {
        // max over t of 2|t| e^{1-1/s}/s^2 is about 2.1704.
        2.2 * 2.0 / (self.beta - self.alpha)
    }
}
