use num_complex::Complex64;
use rayon::prelude::*;

use super::gauge::{build_gauge, GaugeData};
use super::sparse::SparseHermitian;
use crate::error::{Error, Result};
use crate::model::{Grid, ModelSpec};

/// Gauge and matrix of `H_p` on one grid.
#[derive(Clone, Debug)]
pub struct Operator {
    pub p: u32,
    pub grid: Grid,
    pub gauge: GaugeData,
    pub matrix: SparseHermitian,
}

/// `max |b|` over the nodes of `grid`.
pub fn sup_field(spec: &ModelSpec, grid: &Grid) -> Result<f64> {
    let b = spec.flat_density()?;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|node| b.eval(&grid.coords_vec(node)).abs())
        .reduce(|| 0.0, f64::max))
}

/// Five-point Peierls discretization of `(1/p)(i∇ + pA)² + V`.
///
/// The entry coupling a node to the head of an outgoing edge `e` is
/// `-e^{-iθ_e} / (p h²)`; the diagonal is `(2/h_1² + 2/h_2²)/p + V`.
/// Rectangles impose Dirichlet conditions by omitting boundary nodes.
pub fn assemble(spec: &ModelSpec, grid: &Grid, p: u32, gauge: &GaugeData) -> Result<SparseHermitian> {
    spec.flat_density()?;
    if gauge.p != p || gauge.shape[..] != grid.shape()[..] || gauge.periodic != grid.is_periodic() {
        return Err(Error::InvalidInput(
            "gauge data was built for a different grid or tensor power".into(),
        ));
    }
    grid.check_resolution(p as f64, sup_field(spec, grid)?)?;

    let [n1, n2] = gauge.shape;
    let [h1, h2] = gauge.spacing;
    let pf = p as f64;
    let diag_kinetic = (2.0 / (h1 * h1) + 2.0 / (h2 * h2)) / pf;
    let hop = [1.0 / (pf * h1 * h1), 1.0 / (pf * h2 * h2)];

    let triplets: Vec<(usize, usize, Complex64)> = (0..n1 * n2)
        .into_par_iter()
        .flat_map_iter(|node| {
            let (i, j) = (node % n1, node / n1);
            let v = spec.potential.eval(&grid.coords_vec(node));
            let mut out = Vec::with_capacity(3);
            out.push((node, node, Complex64::new(diag_kinetic + v, 0.0)));
            let edges = [
                (gauge.head_x(i, j), gauge.theta_x[node], hop[0]),
                (gauge.head_y(i, j), gauge.theta_y[node], hop[1]),
            ];
            for (head, theta, t) in edges {
                let Some(head) = head else { continue };
                // A[node][head] = -t e^{-iθ}; store whichever lies below the diagonal.
                let forward = Complex64::from_polar(t, -theta) * -1.0;
                if head < node {
                    out.push((node, head, forward));
                } else {
                    out.push((head, node, forward.conj()));
                }
            }
            out
        })
        .collect();
    if let Some(&(_, _, bad)) = triplets.iter().find(|t| !t.2.re.is_finite()) {
        return Err(Error::Evaluation {
            field: "potential".into(),
            coords: Vec::new(),
            value: bad.re,
        });
    }
    SparseHermitian::from_lower_triplets(n1 * n2, &triplets)
}

/// Builds the gauge and assembles `H_p`.
pub fn build_operator(spec: &ModelSpec, grid: &Grid, p: u32) -> Result<Operator> {
    let gauge = build_gauge(spec, grid, p)?;
    let matrix = assemble(spec, grid, p, &gauge)?;
    Ok(Operator {
        p,
        grid: grid.clone(),
        gauge,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use landau_dense_oracle::hermitian_eigenvalues;

    use super::*;

    fn spec(json: &str) -> ModelSpec {
        ModelSpec::from_json_str(json).unwrap()
    }

    #[test]
    fn free_dirichlet_laplacian() {
        let s = spec(r#"{"domain": {"kind": "rectangle", "lengths": [1, 1]}, "b": "0", "b0": 1}"#);
        let grid = Grid::new(&s.domain, &[4, 4]).unwrap();
        let op = build_operator(&s, &grid, 1).unwrap();
        let h = op.matrix.to_dense();
        assert_eq!(op.matrix.dim(), 9);
        assert!(op.matrix.is_real());
        let eigs = hermitian_eigenvalues(9, &h);
        let hh = 0.25;
        let exact = 2.0 * (2.0 / (hh * hh)) * (1.0 - (PI * hh).cos());
        assert!((eigs[0] - exact).abs() < 1e-12 * exact, "{} vs {exact}", eigs[0]);
        assert_eq!(h[0].re, 4.0 / (hh * hh));
        assert_eq!(h[1].re, -1.0 / (hh * hh));
    }

    #[test]
    fn assembled_matrix_is_exactly_hermitian() {
        let s = spec(
            r#"{"domain": {"kind": "torus", "lengths": [2.5066282746310002, 2.5066282746310002]},
                "params": {"L": 2.5066282746310002},
                "b": "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)", "potential": "0.1*sin(x1)", "b0": 0.7}"#,
        );
        let grid = Grid::new(&s.domain, &[64, 64]).unwrap();
        let op = build_operator(&s, &grid, 4).unwrap();
        assert!(op.matrix.is_exactly_hermitian());
        assert!(!op.matrix.is_real());
        assert_eq!(op.matrix.nnz(), 5 * 4096);
    }

    #[test]
    fn resolution_gate() {
        let s = spec(r#"{"domain": {"kind": "rectangle", "lengths": [8, 8]}, "b": "1", "b0": 1}"#);
        let grid = Grid::new(&s.domain, &[64, 64]).unwrap();
        assert!(build_operator(&s, &grid, 1).is_ok());
        assert!(matches!(build_operator(&s, &grid, 2), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn unsupported_geometry() {
        let s = spec(
            r#"{"domain": {"kind": "torus", "lengths": [1, 1]}, "b": "1", "metric": [["2", "0"], ["0", "2"]], "b0": 1}"#,
        );
        let grid = Grid::new(&s.domain, &[8, 8]).unwrap();
        assert!(matches!(
            build_operator(&s, &grid, 1),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn gauge_transform_is_unitary_equivalence() {
        let s = spec(
            r#"{"domain": {"kind": "torus", "lengths": [2.5066282746310002, 2.5066282746310002]},
                "params": {"L": 2.5066282746310002},
                "b": "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)", "b0": 0.7}"#,
        );
        let grid = Grid::new(&s.domain, &[24, 24]).unwrap();
        let op = build_operator(&s, &grid, 1).unwrap();
        let chi: Vec<f64> = (0..grid.len()).map(|k| 3.0 * ((k * k) as f64 * 0.013).sin()).collect();
        let other = assemble(&s, &grid, 1, &op.gauge.with_gradient(&chi)).unwrap();
        let a = hermitian_eigenvalues(576, &op.matrix.to_dense());
        let b = hermitian_eigenvalues(576, &other.to_dense());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn spectrum_bounded_below_by_potential() {
        let s = spec(
            r#"{"domain": {"kind": "rectangle", "lengths": [4, 4]}, "b": "1", "potential": "-0.8*exp(-r2/2)", "b0": 1}"#,
        );
        let grid = Grid::new(&s.domain, &[32, 32]).unwrap();
        let op = build_operator(&s, &grid, 1).unwrap();
        let eigs = hermitian_eigenvalues(op.matrix.dim(), &op.matrix.to_dense());
        assert!(eigs[0] >= -0.8 - 1e-8);
    }
}
