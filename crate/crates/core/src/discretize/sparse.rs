use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Hermitian matrix in compressed sparse row form.
///
/// Built only from lower-triangle entries, which are mirrored, so
/// `A[i][j] == conj(A[j][i])` holds bit for bit and the diagonal is real.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseHermitian {
    /// From entries `(row, col, value)` with `row >= col`. Duplicates are
    /// summed; the imaginary part of diagonal entries is discarded.
    pub fn from_lower_triplets(n: usize, triplets: &[(usize, usize, Complex64)]) -> Result<SparseHermitian> {
        let mut lower: Vec<(usize, usize, Complex64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if j > i {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) is above the diagonal")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) is not finite")));
            }
            let v = if i == j { Complex64::new(v.re, 0.0) } else { v };
            lower.push((i, j, v));
        }
        lower.sort_by_key(|&(i, j, _)| (i, j));
        lower.dedup_by(|later, earlier| {
            if later.0 == earlier.0 && later.1 == earlier.1 {
                earlier.2 += later.2;
                true
            } else {
                false
            }
        });
        let mut full: Vec<(usize, usize, Complex64)> = Vec::with_capacity(2 * lower.len());
        for &(i, j, v) in &lower {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v.conj()));
            }
        }
        full.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &full {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseHermitian {
            n,
            row_ptr,
            cols: full.iter().map(|e| e.1).collect(),
            vals: full.iter().map(|e| e.2).collect(),
        })
    }

    /// Real diagonal matrix.
    pub fn diagonal(values: &[f64]) -> SparseHermitian {
        let triplets: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, Complex64::new(v, 0.0)))
            .collect();
        SparseHermitian::from_lower_triplets(values.len(), &triplets).expect("diagonal entries are valid")
    }

    /// Lower triangle of a dense row-major matrix; entries that are exactly
    /// zero are dropped.
    pub fn from_dense_lower(n: usize, dense: &[Complex64]) -> SparseHermitian {
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                let v = dense[i * n + j];
                if v != Complex64::new(0.0, 0.0) || i == j {
                    triplets.push((i, j, v));
                }
            }
        }
        SparseHermitian::from_lower_triplets(n, &triplets).expect("dense entries are valid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the full (mirrored) matrix.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Lower-triangle entries in row-major order.
    pub fn lower_triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity((self.nnz() + self.n) / 2);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            *yi = acc;
        });
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i * self.n + j] = v;
            }
        }
        out
    }

    /// `A[i][j] == conj(A[j][i])` for every stored entry, compared exactly.
    pub fn is_exactly_hermitian(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v.conj())
        })
    }

    /// Whether every entry is real.
    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    /// Largest absolute row sum (`‖A‖_∞ = ‖A‖_1` for Hermitian `A`).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut d = 0.0;
            let mut r = 0.0;
            for (&j, v) in cols.iter().zip(vals) {
                if j == i {
                    d = v.re;
                } else {
                    r += v.norm();
                }
            }
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }

    /// Half-bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).0.iter().map(move |&j| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Column indices of the strictly off-diagonal entries of row `i`.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).0.iter().copied().filter(move |&j| j != i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mirrors_lower_triangle() {
        let h = SparseHermitian::from_lower_triplets(
            3,
            &[
                (0, 0, c(1.0, 0.0)),
                (1, 0, c(0.5, 0.25)),
                (2, 2, c(3.0, 9.0)),
                (1, 0, c(0.5, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(h.get(1, 0), c(1.0, 0.25));
        assert_eq!(h.get(0, 1), c(1.0, -0.25));
        assert_eq!(h.get(2, 2), c(3.0, 0.0));
        assert_eq!(h.get(1, 1), c(0.0, 0.0));
        assert!(h.is_exactly_hermitian());
        assert_eq!(h.nnz(), 4);
        assert_eq!(h.bandwidth(), 1);
    }

    #[test]
    fn rejects_upper_entries() {
        assert!(SparseHermitian::from_lower_triplets(2, &[(0, 1, c(1.0, 0.0))]).is_err());
        assert!(SparseHermitian::from_lower_triplets(2, &[(2, 0, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let h = SparseHermitian::from_lower_triplets(
            3,
            &[
                (0, 0, c(2.0, 0.0)),
                (2, 0, c(0.0, 1.0)),
                (1, 1, c(-1.0, 0.0)),
                (2, 1, c(1.0, -1.0)),
            ],
        )
        .unwrap();
        let x = [c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)];
        let mut y = [c(0.0, 0.0); 3];
        h.matvec(&x, &mut y);
        let d = h.to_dense();
        for i in 0..3 {
            let want: Complex64 = (0..3).map(|j| d[i * 3 + j] * x[j]).sum();
            assert_eq!(y[i], want);
        }
    }
}
