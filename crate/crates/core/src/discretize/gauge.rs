//! Peierls edge phases `θ_e = p ∫_e A·dl` for a planar field `b`.
//!
//! Rectangle: Landau gauge `A = (0, a_2)`, `a_2(x_1, x_2) = ∫_0^{x_1} b(s, x_2) ds`.
//!
//! Torus: `b = b̄ + b̃`. The mean part uses `A = (0, b̄ (x_1 - o_1))` with the
//! twist `θ = -p b̄ L_1 (x_2 - o_2)` on the wrap edges from the last column
//! back to the first. The periodic part uses `A = (-∂_2 ψ, ∂_1 ψ)` with
//! `Δψ = b̃`, solved by FFT on an oversampled grid, with edge integrals taken
//! exactly in Fourier space.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::quad::{adaptive_gauss, composite_rule, QUAD_TOLERANCE};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{Grid, ModelSpec};
use crate::reduce::pairwise_sum_by;

/// Admissible distance of `pΦ/2π` from an integer.
pub const FLUX_QUANTIZATION_TOLERANCE: f64 = 1e-8;
/// FFT grid points per lattice spacing for the periodic part of the field.
pub const SPECTRAL_OVERSAMPLING: usize = 4;
/// Plaquette phase sums must match `p ∫_P b` to this tolerance.
pub const PLAQUETTE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeData {
    pub p: u32,
    pub shape: [usize; 2],
    pub spacing: [f64; 2],
    pub periodic: bool,
    /// Phase on the edge from a node to its `+x_1` neighbour (wrapping on a
    /// torus). Entries on the last column of a rectangle are unused.
    pub theta_x: Vec<f64>,
    /// Phase on the edge from a node to its `+x_2` neighbour.
    pub theta_y: Vec<f64>,
    /// Total flux `∫ b` over the domain.
    pub flux: f64,
}

impl GaugeData {
    fn node(&self, i: usize, j: usize) -> usize {
        i + self.shape[0] * j
    }

    /// `+x_1` neighbour of node `(i, j)`, if the edge exists.
    pub fn head_x(&self, i: usize, j: usize) -> Option<usize> {
        if i + 1 < self.shape[0] {
            Some(self.node(i + 1, j))
        } else if self.periodic {
            Some(self.node(0, j))
        } else {
            None
        }
    }

    pub fn head_y(&self, i: usize, j: usize) -> Option<usize> {
        if j + 1 < self.shape[1] {
            Some(self.node(i, j + 1))
        } else if self.periodic {
            Some(self.node(i, 0))
        } else {
            None
        }
    }

    /// The gauge `θ_e + χ(head) - χ(tail)`.
    pub fn with_gradient(&self, chi: &[f64]) -> GaugeData {
        assert_eq!(chi.len(), self.theta_x.len(), "gauge function has wrong length");
        let mut out = self.clone();
        for j in 0..self.shape[1] {
            for i in 0..self.shape[0] {
                let tail = self.node(i, j);
                if let Some(head) = self.head_x(i, j) {
                    out.theta_x[tail] += chi[head] - chi[tail];
                }
                if let Some(head) = self.head_y(i, j) {
                    out.theta_y[tail] += chi[head] - chi[tail];
                }
            }
        }
        out
    }

    /// Largest deviation, modulo 2π, of an oriented plaquette phase sum from
    /// `p ∫_P b`, with the flux through each plaquette integrated adaptively.
    pub fn plaquette_residual(&self, spec: &ModelSpec, grid: &Grid) -> Result<f64> {
        let b = spec.flat_density()?;
        let [n1, n2] = self.shape;
        let [h1, h2] = self.spacing;
        let p = self.p as f64;
        let (c1, c2) = if self.periodic { (n1, n2) } else { (n1 - 1, n2 - 1) };
        let mut worst: f64 = 0.0;
        for j in 0..c2 {
            for i in 0..c1 {
                let a = self.node(i, j);
                let right = self.head_x(i, j).unwrap();
                let up = self.head_y(i, j).unwrap();
                let sum = self.theta_x[a] + self.theta_y[right] - self.theta_x[up] - self.theta_y[a];
                let x0 = grid.axis_coord(0, i);
                let y0 = grid.axis_coord(1, j);
                let flux = adaptive_gauss(
                    &|y| adaptive_gauss(&|x| b.eval(&[x, y]), x0, x0 + h1, 1e-14),
                    y0,
                    y0 + h2,
                    1e-14,
                );
                worst = worst.max(wrap_phase(sum - p * flux).abs());
            }
        }
        Ok(worst)
    }
}

/// Reduces a phase to `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Builds Peierls phases for the model on `grid` at tensor power `p`.
pub fn build_gauge(spec: &ModelSpec, grid: &Grid, p: u32) -> Result<GaugeData> {
    let b = spec.flat_density()?;
    if p == 0 {
        return Err(Error::InvalidInput("tensor power p must be at least 1".into()));
    }
    let shape = [grid.shape()[0], grid.shape()[1]];
    let spacing = [grid.spacing()[0], grid.spacing()[1]];
    if grid.is_periodic() {
        torus_gauge(spec, b, grid, p, shape, spacing)
    } else {
        rectangle_gauge(spec, b, grid, p, shape, spacing)
    }
}

fn flux_quanta(p: u32, flux: f64) -> Option<i64> {
    let q = p as f64 * flux / (2.0 * PI);
    let m = q.round();
    ((q - m).abs() <= FLUX_QUANTIZATION_TOLERANCE).then_some(m as i64)
}

/// Closest tensor power to `p` for which the flux is quantized.
pub fn nearest_quantized_power(p: u32, flux: f64) -> Option<u32> {
    let limit = (2 * p).max(64);
    (1..=limit)
        .filter(|&q| flux_quanta(q, flux).is_some())
        .min_by_key(|&q| (q as i64 - p as i64).abs())
}

/// Total flux `∫ b` over a torus, by the trapezoid rule on the oversampled
/// grid (spectrally accurate for smooth periodic `b`).
pub fn torus_flux(spec: &ModelSpec, grid: &Grid) -> Result<f64> {
    let b = spec.flat_density()?;
    let m1 = grid.shape()[0] * SPECTRAL_OVERSAMPLING;
    let m2 = grid.shape()[1] * SPECTRAL_OVERSAMPLING;
    let o = spec.domain.origin();
    let l = spec.domain.lengths();
    let (d1, d2) = (l[0] / m1 as f64, l[1] / m2 as f64);
    let sum = pairwise_sum_by(m1 * m2, |idx| {
        let (a, c) = (idx % m1, idx / m1);
        b.eval(&[o[0] + a as f64 * d1, o[1] + c as f64 * d2])
    });
    Ok(sum * d1 * d2)
}

fn torus_gauge(
    spec: &ModelSpec,
    b: &Expr,
    grid: &Grid,
    p: u32,
    shape: [usize; 2],
    spacing: [f64; 2],
) -> Result<GaugeData> {
    let flux = torus_flux(spec, grid)?;
    let quanta = flux_quanta(p, flux).ok_or(Error::FluxNotQuantized {
        p,
        flux,
        nearest_p: nearest_quantized_power(p, flux),
    })?;
    let l = spec.domain.lengths();
    let o = spec.domain.origin();
    let pf = p as f64;
    // Snap the mean to the exactly quantized value.
    let mean = 2.0 * PI * quanta as f64 / (pf * l[0] * l[1]);
    let [n1, n2] = shape;
    let h2 = spacing[1];
    let count = n1 * n2;
    let mut theta_x = vec![0.0; count];
    let mut theta_y = vec![0.0; count];
    for j in 0..n2 {
        let x2 = grid.axis_coord(1, j) - o[1];
        for i in 0..n1 {
            let x1 = grid.axis_coord(0, i) - o[0];
            let node = i + n1 * j;
            theta_y[node] = pf * mean * x1 * h2;
            if i == n1 - 1 {
                theta_x[node] = -pf * mean * l[0] * x2;
            }
        }
    }

    let constant = b.as_constant().is_some();
    if !constant {
        let (px, py) = periodic_part_phases(b, grid, spec, flux / (l[0] * l[1]), pf);
        for node in 0..count {
            theta_x[node] += px[node];
            theta_y[node] += py[node];
        }
    }
    Ok(GaugeData {
        p,
        shape,
        spacing,
        periodic: true,
        theta_x,
        theta_y,
        flux,
    })
}

fn fft2(data: &mut [Complex64], m1: usize, m2: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (f1, f2) = if inverse {
        (planner.plan_fft_inverse(m1), planner.plan_fft_inverse(m2))
    } else {
        (planner.plan_fft_forward(m1), planner.plan_fft_forward(m2))
    };
    for row in data.chunks_mut(m1) {
        f1.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); m2];
    for a in 0..m1 {
        for c in 0..m2 {
            column[c] = data[a + m1 * c];
        }
        f2.process(&mut column);
        for c in 0..m2 {
            data[a + m1 * c] = column[c];
        }
    }
}

/// Signed wavenumber of FFT bin `m` on a period `l` with `n` points, or
/// `None` for the Nyquist bin.
fn wavenumber(m: usize, n: usize, l: f64) -> Option<f64> {
    if n.is_multiple_of(2) && m == n / 2 {
        return None;
    }
    let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
    Some(2.0 * PI * signed / l)
}

/// `∫_0^h e^{iks} ds`.
fn edge_factor(k: f64, h: f64) -> Complex64 {
    if k == 0.0 {
        return Complex64::new(h, 0.0);
    }
    let ikh = Complex64::new(0.0, k * h);
    (ikh.exp() - 1.0) / Complex64::new(0.0, k)
}

fn periodic_part_phases(b: &Expr, grid: &Grid, spec: &ModelSpec, mean: f64, p: f64) -> (Vec<f64>, Vec<f64>) {
    let r = SPECTRAL_OVERSAMPLING;
    let [n1, n2] = [grid.shape()[0], grid.shape()[1]];
    let (m1, m2) = (n1 * r, n2 * r);
    let l = spec.domain.lengths();
    let o = spec.domain.origin();
    let (h1, h2) = (grid.spacing()[0], grid.spacing()[1]);
    let (d1, d2) = (l[0] / m1 as f64, l[1] / m2 as f64);
    let mut field: Vec<Complex64> = (0..m1 * m2)
        .map(|idx| {
            let (a, c) = (idx % m1, idx / m1);
            let v = b.eval(&[o[0] + a as f64 * d1, o[1] + c as f64 * d2]) - mean;
            Complex64::new(v, 0.0)
        })
        .collect();
    fft2(&mut field, m1, m2, false);
    let norm = 1.0 / (m1 * m2) as f64;
    let mut spec_x = vec![Complex64::new(0.0, 0.0); m1 * m2];
    let mut spec_y = vec![Complex64::new(0.0, 0.0); m1 * m2];
    let i = Complex64::new(0.0, 1.0);
    for c in 0..m2 {
        let Some(k2) = wavenumber(c, m2, l[1]) else { continue };
        for a in 0..m1 {
            let Some(k1) = wavenumber(a, m1, l[0]) else { continue };
            let k_sq = k1 * k1 + k2 * k2;
            if k_sq == 0.0 {
                continue;
            }
            let psi = -field[a + m1 * c] * norm / k_sq;
            spec_x[a + m1 * c] = -i * k2 * psi * edge_factor(k1, h1) * p;
            spec_y[a + m1 * c] = i * k1 * psi * edge_factor(k2, h2) * p;
        }
    }
    fft2(&mut spec_x, m1, m2, true);
    fft2(&mut spec_y, m1, m2, true);
    let mut px = vec![0.0; n1 * n2];
    let mut py = vec![0.0; n1 * n2];
    for j in 0..n2 {
        for i in 0..n1 {
            let fine = i * r + m1 * (j * r);
            px[i + n1 * j] = spec_x[fine].re;
            py[i + n1 * j] = spec_y[fine].re;
        }
    }
    (px, py)
}

fn rectangle_gauge(
    spec: &ModelSpec,
    b: &Expr,
    grid: &Grid,
    p: u32,
    shape: [usize; 2],
    spacing: [f64; 2],
) -> Result<GaugeData> {
    let [n1, n2] = shape;
    let [_, h2] = spacing;
    let pf = p as f64;
    let count = n1 * n2;
    let theta_x = vec![0.0; count];
    let mut theta_y = vec![0.0; count];
    let xs: Vec<f64> = (0..n1).map(|i| grid.axis_coord(0, i)).collect();

    if let Some(b_const) = b.as_constant() {
        for j in 0..n2.saturating_sub(1) {
            for (i, x1) in xs.iter().enumerate() {
                theta_y[i + n1 * j] = pf * b_const * x1 * h2;
            }
        }
    } else {
        for j in 0..n2.saturating_sub(1) {
            let t0 = grid.axis_coord(1, j);
            let row = vertical_row_phases(b, &xs, t0, t0 + h2, pf);
            theta_y[n1 * j..n1 * (j + 1)].copy_from_slice(&row);
        }
    }
    let o = spec.domain.origin();
    let l = spec.domain.lengths();
    let flux = adaptive_gauss(
        &|y| adaptive_gauss(&|x| b.eval(&[x, y]), o[0], o[0] + l[0], QUAD_TOLERANCE),
        o[1],
        o[1] + l[1],
        QUAD_TOLERANCE,
    );
    Ok(GaugeData {
        p,
        shape,
        spacing,
        periodic: false,
        theta_x,
        theta_y,
        flux,
    })
}

/// `p ∫_{t0}^{t1} a_2(x_i, t) dt` for every column `x_i`, sharing the
/// `t`-nodes across the row and refining until successive composite
/// estimates agree for all columns.
fn vertical_row_phases(b: &Expr, xs: &[f64], t0: f64, t1: f64, p: f64) -> Vec<f64> {
    let estimate = |pieces: usize| -> Vec<f64> {
        let mut acc = vec![0.0; xs.len()];
        for (t, w) in composite_rule(t0, t1, pieces) {
            let f = |s: f64| b.eval(&[s, t]);
            let mut a2 = adaptive_gauss(&f, 0.0, xs[0], QUAD_TOLERANCE);
            for (i, slot) in acc.iter_mut().enumerate() {
                if i > 0 {
                    a2 += adaptive_gauss(&f, xs[i - 1], xs[i], QUAD_TOLERANCE);
                }
                *slot += w * a2;
            }
        }
        acc.iter().map(|v| v * p).collect()
    };
    let mut pieces = 1;
    let mut previous = estimate(pieces);
    loop {
        pieces *= 2;
        let current = estimate(pieces);
        let diff = previous
            .iter()
            .zip(&current)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if diff <= QUAD_TOLERANCE || pieces >= 1 << 12 {
            return current;
        }
        previous = current;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> ModelSpec {
        ModelSpec::from_json_str(json).unwrap()
    }

    const UNIT_TORUS: &str = r#"{"domain": {"kind": "torus", "lengths": [2.5066282746310002, 2.5066282746310002]},
        "b": "1", "b0": 1}"#;

    #[test]
    fn landau_gauge_on_rectangle() {
        let s = spec(r#"{"domain": {"kind": "rectangle", "lengths": [4, 4]}, "b": "1", "b0": 1}"#);
        let grid = Grid::new(&s.domain, &[16, 16]).unwrap();
        let g = build_gauge(&s, &grid, 3).unwrap();
        let h = 0.25;
        for i in 0..grid.shape()[0] {
            let x1 = grid.axis_coord(0, i);
            assert!((g.theta_y[i] - 3.0 * x1 * h).abs() < 1e-15);
        }
        assert!(g.plaquette_residual(&s, &grid).unwrap() < PLAQUETTE_TOLERANCE);
        assert!((g.flux - 16.0).abs() < 1e-12);
    }

    #[test]
    fn variable_field_rectangle_plaquettes() {
        let s = spec(
            r#"{"domain": {"kind": "rectangle", "lengths": [3, 2]},
                "b": "1 + 0.4*exp(-r2)*cos(3*x1)", "b0": 0.5}"#,
        );
        let grid = Grid::new(&s.domain, &[24, 16]).unwrap();
        let g = build_gauge(&s, &grid, 5).unwrap();
        let residual = g.plaquette_residual(&s, &grid).unwrap();
        assert!(residual < PLAQUETTE_TOLERANCE, "{residual}");
    }

    #[test]
    fn quantized_torus() {
        let s = spec(UNIT_TORUS);
        let grid = Grid::new(&s.domain, &[16, 16]).unwrap();
        let g = build_gauge(&s, &grid, 7).unwrap();
        assert!((g.flux - 2.0 * PI).abs() < 1e-9);
        assert!(g.plaquette_residual(&s, &grid).unwrap() < PLAQUETTE_TOLERANCE);
    }

    #[test]
    fn unquantized_torus_is_rejected() {
        let s = spec(r#"{"domain": {"kind": "torus", "lengths": [2, 2]}, "b": "1", "b0": 1}"#);
        let grid = Grid::new(&s.domain, &[16, 16]).unwrap();
        match build_gauge(&s, &grid, 3) {
            Err(Error::FluxNotQuantized { p, nearest_p, .. }) => {
                assert_eq!(p, 3);
                // Flux 4 is never a rational multiple of 2π.
                assert_eq!(nearest_p, None);
            }
            other => panic!("{other:?}"),
        }
        let half = spec(
            r#"{"domain": {"kind": "torus", "lengths": [1.7724538509055159, 1.7724538509055159]},
                "b": "1", "b0": 1}"#,
        );
        let grid = Grid::new(&half.domain, &[16, 16]).unwrap();
        match build_gauge(&half, &grid, 3) {
            Err(Error::FluxNotQuantized { nearest_p, .. }) => assert_eq!(nearest_p, Some(2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variable_field_torus_plaquettes() {
        let s = spec(
            r#"{"domain": {"kind": "torus", "lengths": [2.5066282746310002, 2.5066282746310002]},
                "params": {"L": 2.5066282746310002},
                "b": "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L) + 0.1*sin(4*pi*x2/L)", "b0": 0.6}"#,
        );
        let grid = Grid::new(&s.domain, &[20, 24]).unwrap();
        let g = build_gauge(&s, &grid, 4).unwrap();
        let residual = g.plaquette_residual(&s, &grid).unwrap();
        assert!(residual < PLAQUETTE_TOLERANCE, "{residual}");
    }

    #[test]
    fn plaquette_phase_is_stokes_to_leading_order() {
        let s = spec(r#"{"domain": {"kind": "rectangle", "lengths": [2, 2]}, "b": "2 + sin(x1)*x2", "b0": 1}"#);
        for cells in [8usize, 16, 32] {
            let grid = Grid::new(&s.domain, &[cells, cells]).unwrap();
            let g = build_gauge(&s, &grid, 1).unwrap();
            let h = 2.0 / cells as f64;
            let (i, j) = (2, 3);
            let node = i + grid.shape()[0] * j;
            let sum = g.theta_x[node] + g.theta_y[node + 1] - g.theta_x[node + grid.shape()[0]] - g.theta_y[node];
            let (xc, yc) = (grid.axis_coord(0, i) + h / 2.0, grid.axis_coord(1, j) + h / 2.0);
            let center = 2.0 + xc.sin() * yc;
            assert!((sum - center * h * h).abs() < 0.1 * h.powi(4), "cells {cells}");
        }
    }

    #[test]
    fn gradient_keeps_plaquettes() {
        let s = spec(UNIT_TORUS);
        let grid = Grid::new(&s.domain, &[12, 12]).unwrap();
        let g = build_gauge(&s, &grid, 3).unwrap();
        let chi: Vec<f64> = (0..grid.len()).map(|k| (k as f64 * 0.37).sin() * 5.0).collect();
        let g2 = g.with_gradient(&chi);
        assert!(g2.plaquette_residual(&s, &grid).unwrap() < PLAQUETTE_TOLERANCE);
        assert_ne!(g.theta_x, g2.theta_x);
    }

    #[test]
    fn wrap() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-0.5) + 0.5).abs() < 1e-15);
    }
}
