//! Liouville measures of level regions, the Weyl count and the leading trace
//! coefficient `f_0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{landau_level, max_degree, multi_indices, MultiIndex, TestFunction};
use crate::error::Result;
use crate::model::{sample_fields, FieldSamples, Grid, ModelSpec};
use crate::reduce::pairwise_sum_by;

/// Relative distance to an endpoint below which a node counts as sitting on
/// the level set.
pub const LEVEL_SET_TOLERANCE: f64 = 1e-9;
/// Fraction of nodes on a level set that triggers [`WeylWarning::BoundaryOnLevelSet`].
pub const LEVEL_SET_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeylWarning {
    /// An interval endpoint coincides with `Λ_k` on a sizeable node set, so
    /// the count is ill-posed at grid resolution.
    BoundaryOnLevelSet {
        endpoint: f64,
        k: MultiIndex,
        fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylPrediction {
    pub p: f64,
    pub interval: (f64, f64),
    /// `p^n / (2π)^n * Σ_k μ_k`.
    pub value: f64,
    /// Liouville measure per `k`, in graded lexicographic order.
    pub measures: Vec<(MultiIndex, f64)>,
    pub warnings: Vec<WeylWarning>,
}

/// Riemann sum of `1_[α,β](Λ_k) ∏a_j √|g|` over the sample grid (closed
/// interval).
pub fn weyl_measure(samples: &FieldSamples, k: &MultiIndex, interval: (f64, f64)) -> f64 {
    let (lo, hi) = interval;
    let cell = samples.grid().cell_volume();
    pairwise_sum_by(samples.len(), |node| {
        let l = landau_level(samples.frame(node), samples.potential(node), k);
        if l >= lo && l <= hi {
            samples.liouville_density(node)
        } else {
            0.0
        }
    }) * cell
}

fn levels_below(samples: &FieldSamples, energy: f64) -> Vec<MultiIndex> {
    let n = samples.half_dim();
    let (a_min, _) = samples.min_frame();
    let v_min = samples.potentials().iter().cloned().fold(f64::INFINITY, f64::min);
    match max_degree(n, a_min, v_min, energy) {
        Some(deg) => multi_indices(n, deg),
        None => Vec::new(),
    }
}

fn level_set_fraction(samples: &FieldSamples, k: &MultiIndex, endpoint: f64) -> f64 {
    let tol = LEVEL_SET_TOLERANCE * (1.0 + endpoint.abs());
    let hits = (0..samples.len())
        .filter(|&node| {
            let l = landau_level(samples.frame(node), samples.potential(node), k);
            (l - endpoint).abs() <= tol
        })
        .count();
    hits as f64 / samples.len().max(1) as f64
}

/// Leading-order count of eigenvalues of `H_p` in `[α,β]`.
pub fn weyl_count_prediction(samples: &FieldSamples, interval: (f64, f64), p: f64) -> WeylPrediction {
    let n = samples.half_dim() as i32;
    let mut measures = Vec::new();
    let mut warnings = Vec::new();
    for k in levels_below(samples, interval.1) {
        for endpoint in [interval.0, interval.1] {
            let fraction = level_set_fraction(samples, &k, endpoint);
            if fraction >= LEVEL_SET_FRACTION {
                warnings.push(WeylWarning::BoundaryOnLevelSet {
                    endpoint,
                    k: k.clone(),
                    fraction,
                });
            }
        }
        let mu = weyl_measure(samples, &k, interval);
        measures.push((k, mu));
    }
    let total: f64 = measures.iter().map(|(_, m)| m).sum();
    WeylPrediction {
        p,
        interval,
        value: (p / (2.0 * PI)).powi(n) * total,
        measures,
        warnings,
    }
}

/// `f_0(x) = (2π)^{-n} ∏a_j(x) Σ_k φ(Λ_k(x))`.
pub fn local_f0(samples: &FieldSamples, phi: &TestFunction, node: usize) -> f64 {
    let n = samples.half_dim();
    let a = samples.frame(node);
    let v = samples.potential(node);
    let sum: f64 = match max_degree(n, a[0], v, phi.beta) {
        Some(deg) => multi_indices(n, deg)
            .iter()
            .map(|k| phi.eval(landau_level(a, v, k)))
            .sum(),
        None => 0.0,
    };
    (2.0 * PI).powi(-(n as i32)) * a.iter().product::<f64>() * sum
}

/// `<f_0, φ> = ∫ f_0(x) √|g| dx`, by a Riemann sum on the sample grid.
pub fn f0_pairing(samples: &FieldSamples, phi: &TestFunction) -> f64 {
    let cell = samples.grid().cell_volume();
    pairwise_sum_by(samples.len(), |node| {
        local_f0(samples, phi, node) * samples.sqrt_det_g(node)
    }) * cell
}

/// Coarse versus ×2-refined value of a grid quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub coarse: f64,
    pub fine: f64,
    /// `|fine - coarse| / max(|fine|, tiny)`.
    pub relative_change: f64,
}

impl RefinementReport {
    pub fn new(coarse: f64, fine: f64) -> RefinementReport {
        let relative_change = if coarse == fine {
            0.0
        } else {
            (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE)
        };
        RefinementReport {
            coarse,
            fine,
            relative_change,
        }
    }
}

/// Evaluates `quantity` on `grid` and on its ×2 refinement.
pub fn refinement_report<F>(spec: &ModelSpec, grid: &Grid, quantity: F) -> Result<RefinementReport>
where
    F: Fn(&FieldSamples) -> f64,
{
    let coarse = quantity(&sample_fields(spec, grid)?);
    let fine_grid = grid.refined(&spec.domain, 2)?;
    let fine = quantity(&sample_fields(spec, &fine_grid)?);
    Ok(RefinementReport::new(coarse, fine))
}

#[cfg(test)]
mod tests {
    use super::*;

    const VARIABLE_B: &str = "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)";

    fn torus(b: &str, v: &str, l: f64, cells: usize) -> (ModelSpec, Grid, FieldSamples) {
        let cfg = format!(
            r#"{{"domain": {{"kind": "torus", "lengths": [{l}, {l}]}},
                "params": {{"L": {l}}}, "b": "{b}", "potential": "{v}", "b0": 0.5}}"#
        );
        let spec = ModelSpec::from_json_str(&cfg).unwrap();
        let grid = Grid::new(&spec.domain, &[cells, cells]).unwrap();
        let s = sample_fields(&spec, &grid).unwrap();
        (spec, grid, s)
    }

    fn unit_flux_side() -> f64 {
        (2.0 * PI).sqrt()
    }

    #[test]
    fn constant_field_measures() {
        let (_, _, s) = torus("1", "0", 3.0, 16);
        let k0 = MultiIndex(vec![0]);
        assert!((weyl_measure(&s, &k0, (0.5, 1.5)) - 9.0).abs() < 1e-12);
        assert_eq!(weyl_measure(&s, &k0, (1.5, 2.5)), 0.0);
    }

    #[test]
    fn landau_count_equals_flux_quanta() {
        let (_, _, s) = torus("1", "0", unit_flux_side(), 32);
        for p in [4.0, 8.0, 16.0, 32.0] {
            let pred = weyl_count_prediction(&s, (0.5, 1.5), p);
            assert!((pred.value - p).abs() < 1e-12 * p, "{}", pred.value);
            assert!(pred.warnings.is_empty());
            assert_eq!(weyl_count_prediction(&s, (1.5, 2.5), p).value, 0.0);
        }
    }

    #[test]
    fn endpoint_on_level_set_warns() {
        let (_, _, s) = torus("1", "0", unit_flux_side(), 8);
        let pred = weyl_count_prediction(&s, (1.0, 2.0), 4.0);
        assert_eq!(pred.warnings.len(), 1);
        // Closed interval: nodes with Λ = α count.
        assert!((pred.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn variable_field_measure_converges() {
        let l = unit_flux_side();
        let (spec, grid, _) = torus(VARIABLE_B, "0", l, 256);
        let k0 = MultiIndex(vec![0]);
        let report = refinement_report(&spec, &grid, |s| weyl_measure(s, &k0, (0.9, 1.1))).unwrap();
        // Oracle on a 4x finer grid.
        let oracle = brute_measure(l, 1024, 0.9, 1.1);
        assert!(
            (report.coarse - oracle).abs() / oracle < 0.01,
            "{} vs {oracle}",
            report.coarse
        );
        assert!(report.relative_change < 0.01);
    }

    /// Direct midpoint sum of b·1_[lo,hi](b) without the sampling machinery.
    fn brute_measure(l: f64, n: usize, lo: f64, hi: f64) -> f64 {
        let h = l / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 * h, j as f64 * h);
                let b = 1.0 + 0.3 * (2.0 * PI * x / l).cos() * (2.0 * PI * y / l).cos();
                if b >= lo && b <= hi {
                    acc += b;
                }
            }
        }
        acc * h * h
    }

    #[test]
    fn potential_well_prediction() {
        // b = 1, V = -0.8 exp(-r²/2): in [0.3, 0.9] only k = 0 contributes and
        // the region {1 + V in [0.3, 0.9]} is an annulus.
        let cfg = r#"{"domain": {"kind": "rectangle", "lengths": [12, 12]},
            "b": "1", "potential": "-0.8*exp(-r2/2)", "b0": 1}"#;
        let spec = ModelSpec::from_json_str(cfg).unwrap();
        let grid = Grid::new(&spec.domain, &[480, 480]).unwrap();
        let s = sample_fields(&spec, &grid).unwrap();
        let pred = weyl_count_prediction(&s, (0.3, 0.9), 1.0);
        // r² between -2 ln(0.1/0.8) and -2 ln(0.7/0.8).
        let r2_out = -2.0 * (0.1f64 / 0.8).ln();
        let r2_in = -2.0 * (0.7f64 / 0.8).ln();
        let exact = PI * (r2_out - r2_in) / (2.0 * PI);
        assert!((pred.value - exact).abs() / exact < 0.01, "{} vs {exact}", pred.value);
    }

    #[test]
    fn f0_pairing_constant_field() {
        let (_, _, s) = torus("1", "0", unit_flux_side(), 16);
        let phi = TestFunction::bump(0.5, 1.5);
        assert!((f0_pairing(&s, &phi) - 1.0).abs() < 1e-12);
        assert!((local_f0(&s, &phi, 5) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let gap = TestFunction::bump(1.5, 2.5);
        assert_eq!(f0_pairing(&s, &gap), 0.0);
        assert_eq!(local_f0(&s, &gap, 0), 0.0);
    }

    #[test]
    fn f0_pairing_variable_field_against_direct_sum() {
        let l = unit_flux_side();
        let (_, grid, s) = torus(VARIABLE_B, "0", l, 128);
        let phi = TestFunction::bump(0.9, 1.1);
        let h = l / 128.0;
        let mut oracle = 0.0;
        for node in 0..s.len() {
            let x = grid.coords_vec(node);
            let b = 1.0 + 0.3 * (2.0 * PI * x[0] / l).cos() * (2.0 * PI * x[1] / l).cos();
            let direct: f64 = (0..3).map(|k| phi.eval((2 * k + 1) as f64 * b)).sum();
            assert!((local_f0(&s, &phi, node) - b * direct / (2.0 * PI)).abs() < 1e-14);
            oracle += b * direct / (2.0 * PI) * h * h;
        }
        assert!((f0_pairing(&s, &phi) - oracle).abs() < 1e-12 * oracle.abs());
    }

    #[test]
    fn measure_additive_and_monotone() {
        let (_, _, s) = torus(VARIABLE_B, "0", unit_flux_side(), 64);
        let k0 = MultiIndex(vec![0]);
        let a = weyl_measure(&s, &k0, (0.8, 0.95));
        let b = weyl_measure(&s, &k0, (0.95000001, 1.2));
        let ab = weyl_measure(&s, &k0, (0.8, 1.2));
        assert!((a + b - ab).abs() < 1e-12);
        assert!(weyl_measure(&s, &k0, (0.9, 1.0)) <= ab);
    }
}
