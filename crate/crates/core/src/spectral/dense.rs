//! Column-major complex block products backed by `matrixmultiply`.

use matrixmultiply::CGemmOption::Standard;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Strided view of a matrix: element `(i, j)` at `data[i * rs + j * cs]`.
struct View<'a> {
    data: &'a [Complex64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl View<'_> {
    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = (self.rows - 1) * self.rs + (self.cols - 1) * self.cs;
            assert!(last < self.data.len(), "matrix view out of bounds");
        }
    }
}

/// `C = α A B + β C` with `C` column-major `a.rows × b.cols`.
fn gemm(alpha: f64, a: View, b: View, beta: f64, c: &mut [Complex64]) {
    assert_eq!(a.cols, b.rows);
    assert_eq!(c.len(), a.rows * b.cols);
    a.check();
    b.check();
    if c.is_empty() {
        return;
    }
    if a.cols == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    // SAFETY: `Complex64` is `repr(C)` with two `f64` fields, so it has the
    // layout of `[f64; 2]`; the bounds of every view were checked above and
    // `c` is a distinct, contiguous column-major buffer.
    unsafe {
        matrixmultiply::zgemm(
            Standard,
            Standard,
            a.rows,
            a.cols,
            b.cols,
            [alpha, 0.0],
            a.data.as_ptr() as *const [f64; 2],
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr() as *const [f64; 2],
            b.rs as isize,
            b.cs as isize,
            [beta, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            a.rows as isize,
        );
    }
}

fn col_major(data: &[Complex64], rows: usize, cols: usize) -> View<'_> {
    View {
        data,
        rows,
        cols,
        rs: 1,
        cs: rows,
    }
}

/// `Qᴴ V` for `Q` of shape `n × k` and `V` of shape `n × b`; `k × b`.
pub fn adjoint_product(q: &[Complex64], v: &[Complex64], n: usize, k: usize, b: usize) -> Vec<Complex64> {
    // Qᴴ V = conj(Qᵀ conj(V)).
    let vc: Vec<Complex64> = v.iter().map(|x| x.conj()).collect();
    let qt = View {
        data: q,
        rows: k,
        cols: n,
        rs: n,
        cs: 1,
    };
    let mut out = vec![ZERO; k * b];
    gemm(1.0, qt, col_major(&vc, n, b), 0.0, &mut out);
    out.iter_mut().for_each(|x| *x = x.conj());
    out
}

/// `A M` for `A` of shape `n × k` and `M` of shape `k × b`.
pub fn product(a: &[Complex64], m: &[Complex64], n: usize, k: usize, b: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n * b];
    gemm(1.0, col_major(a, n, k), col_major(m, k, b), 0.0, &mut out);
    out
}

/// `C -= A M`.
pub fn sub_product(c: &mut [Complex64], a: &[Complex64], m: &[Complex64], n: usize, k: usize, b: usize) {
    gemm(-1.0, col_major(a, n, k), col_major(m, k, b), 1.0, c);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[Complex64], b: &[Complex64], m: usize, k: usize, n: usize, adjoint: bool) -> Vec<Complex64> {
        let mut c = vec![ZERO; m * n];
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    let x = if adjoint { a[l + i * k].conj() } else { a[i + l * m] };
                    c[i + j * m] += x * b[l + j * k];
                }
            }
        }
        c
    }

    fn data(len: usize, salt: f64) -> Vec<Complex64> {
        (0..len)
            .map(|i| Complex64::new((i as f64 * 0.37 + salt).sin(), (i as f64 * 0.11 - salt).cos()))
            .collect()
    }

    #[test]
    fn products_match_naive_loops() {
        let (n, k, b) = (37, 5, 3);
        let q = data(n * k, 0.1);
        let v = data(n * b, 0.7);
        let got = adjoint_product(&q, &v, n, k, b);
        let want = naive(&q, &v, k, n, b, true);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
        let m = data(k * b, 1.3);
        let got = product(&q, &m, n, k, b);
        let want = naive(&q, &m, n, k, b, false);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
        let mut c = want.clone();
        sub_product(&mut c, &q, &m, n, k, b);
        assert!(c.iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn empty_inner_dimension() {
        assert_eq!(product(&[], &[], 4, 0, 2), vec![ZERO; 8]);
        assert!(adjoint_product(&[], &data(8, 0.0), 4, 0, 2).is_empty());
    }
}
