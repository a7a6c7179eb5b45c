//! Frame eigenvalues `a_j(x)`: the numbers with `spec(g^{-1} B) = {±i a_j}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold below which a frame eigenvalue counts as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Sorted positive frame eigenvalues `a_1 <= ... <= a_n` of the two-form
/// `b_form` (row-major, antisymmetric) with respect to the metric `g`
/// (row-major, SPD), both `d x d` with `d = 2n`.
pub fn frame_eigenvalues(g: &[f64], b_form: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("dimension {d} is not even")));
    }
    if g.len() != d * d || b_form.len() != d * d {
        return Err(Error::InvalidInput("matrix size does not match dimension".into()));
    }
    let (gmin, _) = symmetric_extreme_eigenvalues(g, d);
    if !(gmin > 0.0) {
        return Err(Error::MetricNotSpd {
            coords: Vec::new(),
            min_eigenvalue: gmin,
        });
    }
    let a = frame_eigenvalues_unchecked(g, b_form, d);
    let max_a = *a.last().unwrap();
    if a[0] < DEGENERACY_THRESHOLD * max_a || max_a == 0.0 {
        return Err(Error::DegenerateField { min_a: a[0], max_a });
    }
    Ok(a)
}

/// [`frame_eigenvalues`] without validation; degenerate fields give zeros.
pub(crate) fn frame_eigenvalues_unchecked(g: &[f64], b_form: &[f64], d: usize) -> Vec<f64> {
    if d == 2 {
        // g^{-1/2} J g^{-1/2} = J / sqrt(det g) for the 2x2 symplectic J.
        let det = g[0] * g[3] - g[1] * g[2];
        return vec![b_form[1].abs() / det.sqrt()];
    }
    // S = g^{-1/2} B g^{-1/2} is antisymmetric with the same spectrum as
    // g^{-1} B; S^T S has eigenvalues a_j^2, each twice.
    let gm = DMatrix::from_row_slice(d, d, g);
    let eig = gm.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let g_inv_half = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let b = DMatrix::from_row_slice(d, d, b_form);
    let s = &g_inv_half * b * &g_inv_half;
    let m = s.transpose() * &s;
    let m = (&m + m.transpose()) * 0.5;
    let mut sq: Vec<f64> = m.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
    sq.sort_by(f64::total_cmp);
    sq.chunks(2).map(|pair| (0.5 * (pair[0] + pair[1])).sqrt()).collect()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn symmetric_extreme_eigenvalues(m: &[f64], d: usize) -> (f64, f64) {
    if d == 2 {
        let (a, b, c) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        return (mean - rad, mean + rad);
    }
    let eig = DMatrix::from_row_slice(d, d, m).symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub(crate) fn determinant(m: &[f64], d: usize) -> f64 {
    if d == 2 {
        return m[0] * m[3] - m[1] * m[2];
    }
    DMatrix::from_row_slice(d, d, m).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(d: usize, s: f64) -> Vec<f64> {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = s;
        }
        m
    }

    #[test]
    fn planar_constant_field() {
        let b = [0.0, 2.5, -2.5, 0.0];
        assert_eq!(frame_eigenvalues(&eye(2, 1.0), &b, 2).unwrap(), vec![2.5]);
    }

    #[test]
    fn block_diagonal_four_dimensional() {
        let mut b = vec![0.0; 16];
        b[1] = 2.0;
        b[4] = -2.0;
        b[2 * 4 + 3] = 1.0;
        b[3 * 4 + 2] = -1.0;
        let a = frame_eigenvalues(&eye(4, 1.0), &b, 4).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-14 && (a[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn scaled_metric() {
        let b = [0.0, 3.0, -3.0, 0.0];
        assert_eq!(frame_eigenvalues(&eye(2, 2.0), &b, 2).unwrap(), vec![1.5]);
        // Same answer through the general path.
        let mut b4 = vec![0.0; 16];
        b4[1] = 3.0;
        b4[4] = -3.0;
        b4[2 * 4 + 3] = 3.0;
        b4[3 * 4 + 2] = -3.0;
        let a = frame_eigenvalues(&eye(4, 2.0), &b4, 4).unwrap();
        assert!((a[0] - 1.5).abs() < 1e-14 && (a[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn general_path_matches_complex_eigenvalues_of_g_inv_b() {
        // Non-diagonal metric in d = 4; compare with eigenvalues of g^{-1} B
        // computed by nalgebra's general complex eigen-solver.
        let g = [
            2.0, 0.3, 0.0, 0.1, //
            0.3, 1.5, 0.2, 0.0, //
            0.0, 0.2, 1.0, 0.4, //
            0.1, 0.0, 0.4, 3.0,
        ];
        let upper = [
            (0, 1, 1.2),
            (0, 2, -0.4),
            (0, 3, 0.7),
            (1, 2, 0.9),
            (1, 3, 0.2),
            (2, 3, 2.1),
        ];
        let mut b = vec![0.0; 16];
        for &(i, j, v) in &upper {
            b[i * 4 + j] = v;
            b[j * 4 + i] = -v;
        }
        let a = frame_eigenvalues(&g, &b, 4).unwrap();
        let gm = DMatrix::from_row_slice(4, 4, &g);
        let bm = DMatrix::from_row_slice(4, 4, &b);
        let prod = gm.try_inverse().unwrap() * bm;
        let mut im: Vec<f64> = prod
            .complex_eigenvalues()
            .iter()
            .map(|z| z.im)
            .filter(|v| *v > 0.0)
            .collect();
        im.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&im) {
            assert!((x - y).abs() < 1e-10, "{a:?} vs {im:?}");
        }
    }

    #[test]
    fn degenerate_field_is_reported() {
        let b = [0.0; 4];
        assert!(matches!(
            frame_eigenvalues(&eye(2, 1.0), &b, 2),
            Err(Error::DegenerateField { .. })
        ));
        let mut b4 = vec![0.0; 16];
        b4[1] = 1.0;
        b4[4] = -1.0;
        assert!(matches!(
            frame_eigenvalues(&eye(4, 1.0), &b4, 4),
            Err(Error::DegenerateField { .. })
        ));
    }
}
