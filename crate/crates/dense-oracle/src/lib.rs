//! Dense Hermitian eigenvalues through system LAPACK (`zheevd`).
//!
//! This crate exists so tests can check the sparse machinery in
//! `landau-core` against an independent, well-tested dense solver. It is not
//! a dependency of any shipped binary.

use num_complex::Complex64;

/// Eigenvalues (ascending) of the Hermitian matrix stored row-major in `a`.
///
/// Only the lower triangle is referenced.
pub fn hermitian_eigenvalues(n: usize, a: &[Complex64]) -> Vec<f64> {
    assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
    if n == 0 {
        return Vec::new();
    }
    // LAPACK is column-major; the row-major lower triangle is the column-major
    // upper triangle of the same Hermitian matrix.
    let mut work_a = a.to_vec();
    let mut w = vec![0.0; n];
    let ni = n as i32;
    let mut info = 0;
    let mut work = vec![Complex64::new(0.0, 0.0); 1];
    let mut rwork = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    unsafe {
        lapack::zheevd(
            b'N',
            b'U',
            ni,
            &mut work_a,
            ni,
            &mut w,
            &mut work,
            -1,
            &mut rwork,
            -1,
            &mut iwork,
            -1,
            &mut info,
        );
    }
    assert_eq!(info, 0, "zheevd workspace query failed");
    let lwork = work[0].re as usize;
    let lrwork = rwork[0] as usize;
    let liwork = iwork[0] as usize;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1)];
    let mut rwork = vec![0.0; lrwork.max(1)];
    let mut iwork = vec![0i32; liwork.max(1)];
    unsafe {
        lapack::zheevd(
            b'N',
            b'U',
            ni,
            &mut work_a,
            ni,
            &mut w,
            &mut work,
            lwork as i32,
            &mut rwork,
            lrwork as i32,
            &mut iwork,
            liwork as i32,
            &mut info,
        );
    }
    assert_eq!(info, 0, "zheevd failed with info = {info}");
    w
}

/// Number of eigenvalues strictly below `sigma`.
pub fn count_below(eigenvalues: &[f64], sigma: f64) -> usize {
    eigenvalues.iter().filter(|&&l| l < sigma).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
        let w = hermitian_eigenvalues(2, &a);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 3.0).abs() < 1e-14);
    }
}
