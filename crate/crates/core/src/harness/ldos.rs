//! Local density of states `p^{-n} K_φ(x, x)` against `f_0(x)`.

use serde::{Deserialize, Serialize};

use super::config::{Check, ExperimentConfig, PhiSpec};
use super::report::{fit_series, FitRecord, LDOS_QUANTITY};
use super::sweep::Sweep;
use crate::error::Result;
use crate::model::{FieldSamples, Grid};
use crate::predictor::weyl::local_f0;
use crate::spectral::Eigenpair;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeLdos {
    /// Point from the config.
    pub requested: Vec<f64>,
    /// Coordinates of the grid node it snapped to.
    pub node: Vec<f64>,
    pub measured: f64,
    pub predicted: f64,
    /// `|measured - predicted| / |predicted|`, or the absolute difference
    /// when the prediction vanishes.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdosAverage {
    pub measured: f64,
    pub predicted: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdosRow {
    pub phi: PhiSpec,
    /// Eigenvalues in `supp φ`.
    pub count: usize,
    pub nodes: Vec<NodeLdos>,
    /// Mean of the node deviations.
    pub mean_deviation: Option<f64>,
    /// Both sides averaged over every grid node.
    pub average: LdosAverage,
}

impl LdosRow {
    /// The deviation followed across `p`: the node mean when nodes were
    /// given, otherwise the node-averaged deviation.
    pub fn tracked_deviation(&self) -> f64 {
        self.mean_deviation.unwrap_or(self.average.deviation)
    }
}

fn deviation(measured: f64, predicted: f64) -> f64 {
    let diff = (measured - predicted).abs();
    if predicted == 0.0 {
        diff
    } else {
        diff / predicted.abs()
    }
}

/// Index of the node nearest to `x` (minimum image on tori).
pub fn nearest_node(grid: &Grid, x: &[f64]) -> usize {
    let mut multi = vec![0usize; grid.dim()];
    for (axis, m) in multi.iter_mut().enumerate() {
        let n = grid.shape()[axis];
        let period = grid.spacing()[axis] * grid.cells()[axis] as f64;
        let gap = |i: usize| {
            let d = (grid.axis_coord(axis, i) - x[axis]).abs();
            if grid.is_periodic() {
                let r = d.rem_euclid(period);
                r.min(period - r)
            } else {
                d
            }
        };
        *m = (0..n).min_by(|&a, &b| gap(a).total_cmp(&gap(b))).unwrap_or(0);
    }
    grid.ravel(&multi)
}

/// Compares the LDOS built from `pairs` (all eigenpairs in `supp φ`) with
/// `f_0` at the requested points and on average.
pub fn ldos_row(samples: &FieldSamples, pairs: &[Eigenpair], phi: PhiSpec, points: &[Vec<f64>], p: u32) -> LdosRow {
    let grid = samples.grid();
    let tf = phi.test_function();
    let n = samples.half_dim() as i32;
    let scale = (p as f64).powi(-n) / grid.cell_volume();
    let weights: Vec<f64> = pairs.iter().map(|e| tf.eval(e.value)).collect();
    let kernel = |node: usize| -> f64 {
        pairs
            .iter()
            .zip(&weights)
            .map(|(e, w)| w * e.vector[node].norm_sqr())
            .sum::<f64>()
            * scale
    };
    let nodes: Vec<NodeLdos> = points
        .iter()
        .map(|x| {
            let node = nearest_node(grid, x);
            let measured = kernel(node);
            let predicted = local_f0(samples, &tf, node);
            NodeLdos {
                requested: x.clone(),
                node: grid.coords_vec(node),
                measured,
                predicted,
                deviation: deviation(measured, predicted),
            }
        })
        .collect();
    let count = grid.len() as f64;
    // Each unit eigenvector contributes 1/cell_volume summed over nodes.
    let measured = weights.iter().sum::<f64>() * scale / count;
    let predicted = crate::reduce::pairwise_sum_by(grid.len(), |node| local_f0(samples, &tf, node)) / count;
    let mean_deviation =
        (!nodes.is_empty()).then(|| nodes.iter().map(|d| d.deviation).sum::<f64>() / nodes.len() as f64);
    LdosRow {
        phi,
        count: pairs.len(),
        nodes,
        mean_deviation,
        average: LdosAverage {
            measured,
            predicted,
            deviation: deviation(measured, predicted),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdosReport {
    pub rows: Vec<(u32, LdosRow)>,
    /// Power-law fit of the tracked deviation.
    pub trend: FitRecord,
}

/// LDOS comparison at `points` for every `p` of `config`. Solver errors are
/// returned rather than recorded.
pub fn ldos_check(config: &ExperimentConfig, points: &[Vec<f64>]) -> Result<LdosReport> {
    let mut config = config.clone();
    config.checks = vec![Check::Ldos];
    config.ldos.nodes = points.to_vec();
    config.validate()?;
    let sweep = Sweep::prepare(&config)?;
    let mut rows = Vec::new();
    for &(_, p) in &sweep.powers {
        let (row, _) = sweep.ldos_at(p)?;
        rows.push((p, row));
    }
    let (ps, values) = rows.iter().map(|(p, r)| (*p, r.tracked_deviation())).unzip();
    let trend = fit_series(LDOS_QUANTITY.into(), ps, values, config.tolerances.resolution_floor);
    Ok(LdosReport { rows, trend })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Domain, Grid};

    #[test]
    fn snapping() {
        let torus = Domain::Torus {
            lengths: vec![4.0, 4.0],
            origin: vec![0.0, 0.0],
        };
        let g = Grid::new(&torus, &[8, 8]).unwrap();
        assert_eq!(g.coords_vec(nearest_node(&g, &[1.1, 2.9])), vec![1.0, 3.0]);
        // 3.9 is nearer to 0 through the wrap than to 3.5.
        assert_eq!(g.coords_vec(nearest_node(&g, &[3.9, 0.0])), vec![0.0, 0.0]);
        let rect = Domain::Rectangle {
            lengths: vec![4.0, 4.0],
            origin: vec![-2.0, -2.0],
        };
        let g = Grid::new(&rect, &[8, 8]).unwrap();
        assert_eq!(g.coords_vec(nearest_node(&g, &[-5.0, 0.1])), vec![-1.5, 0.0]);
    }

    #[test]
    fn relative_and_absolute_deviation() {
        assert_eq!(deviation(0.0, 0.0), 0.0);
        assert_eq!(deviation(0.5, 0.0), 0.5);
        assert!((deviation(1.1, 1.0) - 0.1).abs() < 1e-15);
    }
}
