use serde::{Deserialize, Serialize};

use super::{landau_level, max_degree, multi_indices, MultiIndex};
use crate::error::{Error, Result};
use crate::model::FieldSamples;

/// Range of one local Landau level `Λ_k` over a region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub k: MultiIndex,
    pub lo: f64,
    pub hi: f64,
}

/// The band set `Σ` restricted to a region and to energies `<= k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauBandSet {
    /// Human-readable region label.
    pub region: String,
    pub k_max: f64,
    /// Every band with `lo <= k_max`, in graded lexicographic order of `k`.
    pub bands: Vec<Band>,
    /// Open intervals of `[min lo, k_max]` that meet no band.
    pub gaps: Vec<(f64, f64)>,
}

impl LandauBandSet {
    /// Connected components of the union of bands, ascending.
    pub fn components(&self) -> Vec<(f64, f64)> {
        let mut spans: Vec<(f64, f64)> = self.bands.iter().map(|b| (b.lo, b.hi)).collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in spans {
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        out
    }

    /// Distance from `lambda` to the union of bands (0 inside a band).
    pub fn distance(&self, lambda: f64) -> f64 {
        self.bands
            .iter()
            .map(|b| {
                if lambda < b.lo {
                    b.lo - lambda
                } else if lambda > b.hi {
                    lambda - b.hi
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn lowest(&self) -> Option<f64> {
        self.bands.iter().map(|b| b.lo).reduce(f64::min)
    }
}

/// Bands of all local Landau levels over the nodes where `region` is true.
///
/// Every `k` with `(2|k| + n) min a + min V <= k_max` is enumerated; a band is
/// kept when its lower end is at most `k_max`.
pub fn sigma_bands(samples: &FieldSamples, region: &[bool], k_max: f64) -> Result<LandauBandSet> {
    if region.len() != samples.len() {
        return Err(Error::InvalidInput(format!(
            "region mask has {} entries, samples have {}",
            region.len(),
            samples.len()
        )));
    }
    let nodes: Vec<usize> = (0..samples.len()).filter(|&i| region[i]).collect();
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = samples.half_dim();
    let a_min = nodes.iter().map(|&i| samples.frame(i)[0]).fold(f64::INFINITY, f64::min);
    let v_min = nodes
        .iter()
        .map(|&i| samples.potential(i))
        .fold(f64::INFINITY, f64::min);

    let mut bands = Vec::new();
    if let Some(deg) = max_degree(n, a_min, v_min, k_max) {
        for k in multi_indices(n, deg) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in &nodes {
                let l = landau_level(samples.frame(i), samples.potential(i), &k);
                lo = lo.min(l);
                hi = hi.max(l);
            }
            if lo <= k_max {
                bands.push(Band { k, lo, hi });
            }
        }
    }

    let region_label = if nodes.len() == samples.len() {
        "all nodes".to_string()
    } else {
        format!("{} of {} nodes", nodes.len(), samples.len())
    };
    let mut set = LandauBandSet {
        region: region_label,
        k_max,
        bands,
        gaps: Vec::new(),
    };
    let comps = set.components();
    let mut gaps = Vec::new();
    for w in comps.windows(2) {
        if w[0].1 < w[1].0 && w[0].1 < k_max {
            gaps.push((w[0].1, w[1].0.min(k_max)));
        }
    }
    if let Some(last) = comps.last() {
        if last.1 < k_max {
            gaps.push((last.1, k_max));
        }
    }
    set.gaps = gaps;
    Ok(set)
}
