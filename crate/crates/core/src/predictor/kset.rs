//! The set `K_[a,b]` of points whose local Landau spectrum meets `[a,b]`,
//! and the distance to it.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{landau_level, max_degree, multi_indices};
use crate::model::{FieldSamples, Grid};

/// Indicator of `K_[a,b]` on grid nodes plus the distance to it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KSetField {
    pub interval: (f64, f64),
    pub shape: Vec<usize>,
    pub indicator: Vec<bool>,
    /// Euclidean (minimum-image on tori) distance to the nearest indicator
    /// node; `f64::INFINITY` everywhere when the set is empty.
    pub distance: Vec<f64>,
    /// Largest violation of `d(i) <= d(j) + |x_i - x_j|` over grid edges found
    /// by the validation pass.
    pub max_triangle_violation: f64,
}

impl KSetField {
    pub fn is_empty(&self) -> bool {
        !self.indicator.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.indicator.iter().filter(|&&b| b).count()
    }
}

/// Computes `K_[a,b]` on the sample grid and the distance field to it.
///
/// The distance is propagated Dijkstra-style over the 8-neighbour stencil (all
/// `3^d - 1` neighbours in general), carrying the displacement to the nearest
/// source so that the value is a true Euclidean length, then refined with one
/// relaxation sweep.
pub fn k_set(samples: &FieldSamples, interval: (f64, f64)) -> KSetField {
    let (lo, hi) = interval;
    let n = samples.half_dim();
    let grid = samples.grid();
    let indicator: Vec<bool> = (0..samples.len())
        .map(|node| {
            let a = samples.frame(node);
            let v = samples.potential(node);
            match max_degree(n, a[0], v, hi) {
                None => false,
                Some(deg) => multi_indices(n, deg).iter().any(|k| {
                    let l = landau_level(a, v, k);
                    l >= lo && l <= hi
                }),
            }
        })
        .collect();
    let distance = distance_transform(grid, &indicator);
    let max_triangle_violation = triangle_violation(grid, &distance);
    KSetField {
        interval,
        shape: grid.shape().to_vec(),
        indicator,
        distance,
        max_triangle_violation,
    }
}

struct Stencil {
    /// Per neighbour: integer offset per axis.
    offsets: Vec<Vec<i64>>,
}

impl Stencil {
    fn new(d: usize) -> Stencil {
        let mut offsets = Vec::new();
        let total = 3usize.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            let off: Vec<i64> = (0..d)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect();
            if off.iter().any(|&o| o != 0) {
                offsets.push(off);
            }
        }
        Stencil { offsets }
    }
}

/// Neighbour of `multi` along `off`, honouring periodicity.
fn neighbour(grid: &Grid, multi: &[usize], off: &[i64], out: &mut [usize]) -> bool {
    for (axis, ((&m, &o), dst)) in multi.iter().zip(off).zip(out.iter_mut()).enumerate() {
        let n = grid.shape()[axis] as i64;
        let mut j = m as i64 + o;
        if grid.is_periodic() {
            j = j.rem_euclid(n);
        } else if j < 0 || j >= n {
            return false;
        }
        *dst = j as usize;
    }
    true
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance_transform(grid: &Grid, sources: &[bool]) -> Vec<f64> {
    let d = grid.dim();
    let count = grid.len();
    let stencil = Stencil::new(d);
    let h = grid.spacing();
    let mut dist = vec![f64::INFINITY; count];
    let mut disp = vec![0.0; count * d];
    let mut heap = BinaryHeap::new();
    for (i, &s) in sources.iter().enumerate() {
        if s {
            dist[i] = 0.0;
            heap.push(Reverse((0u64, i)));
        }
    }
    let mut multi = vec![0usize; d];
    let mut nb = vec![0usize; d];
    let mut cand = vec![0.0; d];
    while let Some(Reverse((key, i))) = heap.pop() {
        if key != dist[i].to_bits() {
            continue;
        }
        grid.unravel(i, &mut multi);
        for off in &stencil.offsets {
            if !neighbour(grid, &multi, off, &mut nb) {
                continue;
            }
            let j = grid.ravel(&nb);
            for a in 0..d {
                cand[a] = disp[i * d + a] + off[a] as f64 * h[a];
            }
            let c = norm(&cand);
            if c < dist[j] {
                dist[j] = c;
                disp[j * d..(j + 1) * d].copy_from_slice(&cand);
                heap.push(Reverse((c.to_bits(), j)));
            }
        }
    }

    // One relaxation sweep: adopt a neighbour's nearest source when closer.
    for i in 0..count {
        if !dist[i].is_finite() {
            continue;
        }
        grid.unravel(i, &mut multi);
        for off in &stencil.offsets {
            if !neighbour(grid, &multi, off, &mut nb) {
                continue;
            }
            let j = grid.ravel(&nb);
            for a in 0..d {
                cand[a] = disp[j * d + a] - off[a] as f64 * h[a];
            }
            let c = norm(&cand);
            if c < dist[i] {
                dist[i] = c;
                disp[i * d..(i + 1) * d].copy_from_slice(&cand);
            }
        }
    }
    dist
}

fn triangle_violation(grid: &Grid, dist: &[f64]) -> f64 {
    let d = grid.dim();
    let stencil = Stencil::new(d);
    let h = grid.spacing();
    let mut multi = vec![0usize; d];
    let mut nb = vec![0usize; d];
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        if !dist[i].is_finite() {
            continue;
        }
        grid.unravel(i, &mut multi);
        for off in &stencil.offsets {
            if !neighbour(grid, &multi, off, &mut nb) {
                continue;
            }
            let j = grid.ravel(&nb);
            let edge = off
                .iter()
                .zip(h)
                .map(|(&o, h)| (o as f64 * h).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(dist[i] - dist[j] - edge);
        }
    }
    worst
}
