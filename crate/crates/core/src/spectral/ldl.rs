//! Multifrontal `L D L^H` factorization of a shifted Hermitian matrix with
//! Bunch–Kaufman 1×1/2×2 pivoting inside each front, and its inertia.
//!
//! Pivots are searched among a front's fully summed variables only. When
//! no admissible pivot exists there, the factorization reports a breakdown
//! and the caller perturbs the shift.

use num_complex::Complex64;

use super::nested::Analysis;
use crate::discretize::SparseHermitian;

/// Bunch–Kaufman threshold `(1 + √17) / 8`.
pub const PIVOT_ALPHA: f64 = 0.640_388_203_202_208;
/// Largest admissible multiplier magnitude.
pub const MAX_GROWTH: f64 = 1e8;
/// Pivot blocks with an eigenvalue below this multiple of `‖A‖` count as
/// singular.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Why a factorization stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Breakdown {
    SmallPivot { column: usize, magnitude: f64 },
    Growth { column: usize, growth: f64 },
}

/// Factored front: the first `s` columns of the dense front matrix.
struct FrontFactor {
    /// New-numbering index of each front row, in pivot order.
    index: Vec<usize>,
    s: usize,
    /// Column-major `f × s` panel: unit-lower `L` below the pivot blocks,
    /// `D` on and just below the diagonal.
    panel: Vec<Complex64>,
    /// `1` or `2` at the first column of each pivot block, `0` at the second
    /// column of a 2×2 block.
    block: Vec<u8>,
}

/// Factor of `P (A - σ I) P^T`.
pub struct Ldl {
    n: usize,
    fronts: Vec<FrontFactor>,
    negative: usize,
    max_growth: f64,
    delayed: usize,
}

fn hermitian_2x2_eigenvalues(d11: f64, d21: Complex64, d22: f64) -> (f64, f64) {
    let mean = 0.5 * (d11 + d22);
    let rad = (0.25 * (d11 - d22) * (d11 - d22) + d21.norm_sqr()).sqrt();
    (mean - rad, mean + rad)
}

fn inverse_2x2(d11: f64, d21: Complex64, d22: f64) -> [[Complex64; 2]; 2] {
    let det = d11 * d22 - d21.norm_sqr();
    [
        [Complex64::new(d22 / det, 0.0), -d21.conj() / det],
        [-d21 / det, Complex64::new(d11 / det, 0.0)],
    ]
}

/// Dense Hermitian front, lower triangle in column-major order.
struct Dense {
    f: usize,
    a: Vec<Complex64>,
}

impl Dense {
    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.a[i + j * self.f]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.a[i + j * self.f]
    }

    /// `|A[i][j]|` for any `i, j` using the stored triangle.
    fn abs(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.at(i, j).norm()
        } else {
            self.at(j, i).norm()
        }
    }

    /// Symmetric interchange of rows and columns `p < q`.
    fn swap(&mut self, p: usize, q: usize) {
        let f = self.f;
        for j in 0..p {
            self.a.swap(p + j * f, q + j * f);
        }
        self.a.swap(p + p * f, q + q * f);
        for j in p + 1..q {
            let t = self.at(j, p);
            *self.at_mut(j, p) = self.at(q, j).conj();
            *self.at_mut(q, j) = t.conj();
        }
        *self.at_mut(q, p) = self.at(q, p).conj();
        for i in q + 1..f {
            self.a.swap(i + p * f, i + q * f);
        }
    }

    /// Eliminates the 1×1 pivot at `k`; returns the largest multiplier.
    fn eliminate_one(&mut self, k: usize) -> f64 {
        let f = self.f;
        let d = self.at(k, k).re;
        let (head, tail) = self.a.split_at_mut((k + 1) * f);
        let ck = &mut head[k * f..];
        for j in k + 1..f {
            let cj = ck[j].conj() / d;
            if cj == ZERO {
                continue;
            }
            let col = &mut tail[(j - k - 1) * f..(j - k) * f];
            for i in j..f {
                col[i] -= ck[i] * cj;
            }
            col[j].im = 0.0;
        }
        let mut growth: f64 = 0.0;
        for v in &mut ck[k + 1..f] {
            *v /= d;
            growth = growth.max(v.norm());
        }
        growth
    }

    /// Eliminates the 2×2 pivot at `k, k+1`; returns the largest multiplier.
    fn eliminate_two(&mut self, k: usize) -> f64 {
        let f = self.f;
        let inv = inverse_2x2(self.at(k, k).re, self.at(k + 1, k), self.at(k + 1, k + 1).re);
        let rows = k + 2..f;
        let c0: Vec<Complex64> = rows.clone().map(|i| self.at(i, k)).collect();
        let c1: Vec<Complex64> = rows.clone().map(|i| self.at(i, k + 1)).collect();
        let l0: Vec<Complex64> = c0.iter().zip(&c1).map(|(a, b)| a * inv[0][0] + b * inv[1][0]).collect();
        let l1: Vec<Complex64> = c0.iter().zip(&c1).map(|(a, b)| a * inv[0][1] + b * inv[1][1]).collect();
        let base = k + 2;
        for j in rows.clone() {
            let (a, b) = (c0[j - base].conj(), c1[j - base].conj());
            if a == ZERO && b == ZERO {
                continue;
            }
            let col = &mut self.a[j * f..(j + 1) * f];
            for i in j..f {
                col[i] -= l0[i - base] * a + l1[i - base] * b;
            }
            col[j].im = 0.0;
        }
        let mut growth: f64 = 0.0;
        for i in rows {
            *self.at_mut(i, k) = l0[i - base];
            *self.at_mut(i, k + 1) = l1[i - base];
            growth = growth.max(l0[i - base].norm()).max(l1[i - base].norm());
        }
        growth
    }
}

/// Multipliers above `1 / PIVOT_THRESHOLD` send a pivot to the parent front.
pub const PIVOT_THRESHOLD: f64 = 0.01;

/// Largest `|A[i][j]|` over active rows `i >= k`, `i != j`.
fn off_max(m: &Dense, k: usize, j: usize) -> f64 {
    (k..m.f).filter(|&i| i != j).map(|i| m.abs(i, j)).fold(0.0, f64::max)
}

/// Largest multiplier a 2×2 pivot at `k, k+1` would produce.
fn two_by_two_growth(m: &Dense, k: usize) -> f64 {
    let inv = inverse_2x2(m.at(k, k).re, m.at(k + 1, k), m.at(k + 1, k + 1).re);
    (k + 2..m.f)
        .map(|i| {
            let (a, b) = (m.at(i, k), m.at(i, k + 1));
            (a * inv[0][0] + b * inv[1][0])
                .norm()
                .max((a * inv[0][1] + b * inv[1][1]).norm())
        })
        .fold(0.0, f64::max)
}

/// Bunch–Kaufman choice among the fully summed columns `k..s`, moved into
/// place at `k`. Returns the block size, or `None` when the remaining
/// columns should be delayed.
fn choose_pivot(m: &mut Dense, index: &mut [usize], k: usize, s: usize, may_delay: bool) -> Option<usize> {
    let f = m.f;
    let akk = m.at(k, k).re.abs();
    let mut colmax: f64 = 0.0;
    let mut r = None;
    let mut rmax: f64 = 0.0;
    for i in k + 1..f {
        let v = m.at(i, k).norm();
        colmax = colmax.max(v);
        if i < s && v > rmax {
            rmax = v;
            r = Some(i);
        }
    }
    let mut size = 1;
    if akk < PIVOT_ALPHA * colmax {
        if let Some(r) = r {
            let rowmax = off_max(m, k, r);
            if akk * rowmax >= PIVOT_ALPHA * colmax * colmax {
                // 1×1 at k.
            } else if m.at(r, r).re.abs() >= PIVOT_ALPHA * rowmax {
                m.swap(k, r);
                index.swap(k, r);
            } else {
                if r != k + 1 {
                    m.swap(k + 1, r);
                    index.swap(k + 1, r);
                }
                size = 2;
            }
        }
    }
    if !may_delay {
        return Some(size);
    }
    let growth = if size == 2 {
        two_by_two_growth(m, k)
    } else {
        off_max(m, k, k) / m.at(k, k).re.abs()
    };
    if growth <= 1.0 / PIVOT_THRESHOLD {
        return Some(size);
    }
    // Any remaining diagonal entry that passes the threshold test.
    for j in k + 1..s {
        if m.at(j, j).re.abs() * (1.0 / PIVOT_THRESHOLD) >= off_max(m, k, j) && m.at(j, j).re != 0.0 {
            m.swap(k, j);
            index.swap(k, j);
            return Some(1);
        }
    }
    None
}

impl Ldl {
    /// Factors `P (A - σ I) P^T` along the assembly tree of `analysis`.
    pub fn factor(h: &SparseHermitian, analysis: &Analysis, sigma: f64) -> Result<Ldl, Breakdown> {
        let n = h.dim();
        let norm = h.norm_inf() + sigma.abs();
        let tiny = PIVOT_TOLERANCE * norm.max(f64::MIN_POSITIVE);
        let mut has_parent = vec![false; analysis.fronts.len()];
        for front in &analysis.fronts {
            for &c in &front.children {
                has_parent[c] = true;
            }
        }
        let mut local = vec![usize::MAX; n];
        // Per front: rows (delayed variables, then boundary) and the
        // Schur complement on them.
        let mut updates: Vec<Option<(Vec<usize>, Dense)>> = (0..analysis.fronts.len()).map(|_| None).collect();
        let mut fronts = Vec::with_capacity(analysis.fronts.len());
        let mut negative = 0;
        let mut max_growth: f64 = 0.0;
        let mut delayed = 0;

        for (t, front) in analysis.fronts.iter().enumerate() {
            let children: Vec<(Vec<usize>, Dense)> = front.children.iter().filter_map(|&c| updates[c].take()).collect();
            let mut index: Vec<usize> = front.vars.clone().collect();
            for (c, (rows, _)) in front.children.iter().zip(&children) {
                let delayed = rows.len() - analysis.fronts[*c].boundary.len();
                index.extend_from_slice(&rows[..delayed]);
            }
            let s = index.len();
            index.extend_from_slice(&front.boundary);
            let f = index.len();
            for (r, &g) in index.iter().enumerate() {
                local[g] = r;
            }
            let mut m = Dense {
                f,
                a: vec![ZERO; f * f],
            };
            for (c, v) in front.vars.clone().enumerate() {
                let (cols, vals) = h.row(analysis.perm[v]);
                for (&u_old, &val) in cols.iter().zip(vals) {
                    let u = analysis.inverse[u_old];
                    if u >= v {
                        *m.at_mut(local[u], c) += val.conj();
                    }
                }
                let d = m.at_mut(c, c);
                d.re -= sigma;
                d.im = 0.0;
            }
            for (rows, u) in &children {
                let pos: Vec<usize> = rows.iter().map(|&g| local[g]).collect();
                for (j, &rj) in pos.iter().enumerate() {
                    for (i, &ri) in pos.iter().enumerate().skip(j) {
                        if ri >= rj {
                            *m.at_mut(ri, rj) += u.at(i, j);
                        } else {
                            *m.at_mut(rj, ri) += u.at(i, j).conj();
                        }
                    }
                }
            }

            let may_delay = has_parent[t];
            let mut block = Vec::with_capacity(s);
            let mut k = 0;
            while k < s {
                let column = index[k];
                let Some(pivot) = choose_pivot(&mut m, &mut index, k, s, may_delay) else {
                    break;
                };
                if pivot == 2 {
                    let (e1, e2) = hermitian_2x2_eigenvalues(m.at(k, k).re, m.at(k + 1, k), m.at(k + 1, k + 1).re);
                    let magnitude = e1.abs().min(e2.abs());
                    if magnitude <= tiny {
                        return Err(Breakdown::SmallPivot { column, magnitude });
                    }
                    let growth = m.eliminate_two(k);
                    if growth > MAX_GROWTH {
                        return Err(Breakdown::Growth { column, growth });
                    }
                    max_growth = max_growth.max(growth);
                    negative += (e1 < 0.0) as usize + (e2 < 0.0) as usize;
                    block.extend([2, 0]);
                    k += 2;
                } else {
                    let d = m.at(k, k).re;
                    if d.abs() <= tiny {
                        return Err(Breakdown::SmallPivot {
                            column,
                            magnitude: d.abs(),
                        });
                    }
                    let growth = m.eliminate_one(k);
                    if growth > MAX_GROWTH {
                        return Err(Breakdown::Growth { column, growth });
                    }
                    max_growth = max_growth.max(growth);
                    negative += (d < 0.0) as usize;
                    block.push(1);
                    k += 1;
                }
            }

            let e = k;
            delayed += s - e;
            let b = f - e;
            if b > 0 {
                let mut u = Dense {
                    f: b,
                    a: vec![ZERO; b * b],
                };
                for j in 0..b {
                    for i in j..b {
                        *u.at_mut(i, j) = m.at(e + i, e + j);
                    }
                }
                updates[t] = Some((index[e..].to_vec(), u));
            }
            for &g in &index {
                local[g] = usize::MAX;
            }
            m.a.truncate(f * e);
            fronts.push(FrontFactor {
                index,
                s: e,
                panel: m.a,
                block,
            });
        }
        Ok(Ldl {
            n,
            fronts,
            negative,
            max_growth,
            delayed,
        })
    }

    /// Number of negative eigenvalues of `A - σ I`.
    pub fn negative_count(&self) -> usize {
        self.negative
    }

    pub fn max_growth(&self) -> f64 {
        self.max_growth
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Pivots passed from a front to its parent, summed over all moves.
    pub fn delayed_pivots(&self) -> usize {
        self.delayed
    }

    /// Stored factor entries.
    pub fn stored_entries(&self) -> usize {
        self.fronts.iter().map(|f| f.panel.len()).sum()
    }

    /// Solves `(A - σ I) x = b` in the permuted ordering, for `k` right-hand
    /// sides stored one after another in `x`.
    pub fn solve_permuted(&self, x: &mut [Complex64], k: usize) {
        let n = self.n;
        assert_eq!(x.len(), n * k);
        let mut y = Vec::new();
        // Forward: L w = b, then w_block = D^{-1} w_block, front by front.
        for fr in &self.fronts {
            let f = fr.index.len();
            gather(fr, x, n, k, &mut y);
            let col = |c: usize| &fr.panel[c * f..(c + 1) * f];
            let mut c = 0;
            while c < fr.s {
                if fr.block[c] == 1 {
                    let l = col(c);
                    let d = l[c].re;
                    for t in 0..k {
                        let ys = &mut y[t * f..(t + 1) * f];
                        let z = ys[c];
                        if z != ZERO {
                            for i in c + 1..f {
                                ys[i] -= l[i] * z;
                            }
                        }
                        ys[c] = z / d;
                    }
                    c += 1;
                } else {
                    let (l0, l1) = (col(c), col(c + 1));
                    let inv = inverse_2x2(l0[c].re, l0[c + 1], l1[c + 1].re);
                    for t in 0..k {
                        let ys = &mut y[t * f..(t + 1) * f];
                        let (z0, z1) = (ys[c], ys[c + 1]);
                        for i in c + 2..f {
                            ys[i] -= l0[i] * z0 + l1[i] * z1;
                        }
                        ys[c] = inv[0][0] * z0 + inv[0][1] * z1;
                        ys[c + 1] = inv[1][0] * z0 + inv[1][1] * z1;
                    }
                    c += 2;
                }
            }
            scatter(fr, x, n, k, &y, f);
        }
        // Backward: L^H x = z, fronts in reverse.
        for fr in self.fronts.iter().rev() {
            let f = fr.index.len();
            gather(fr, x, n, k, &mut y);
            let col = |c: usize| &fr.panel[c * f..(c + 1) * f];
            let mut c = fr.s;
            while c > 0 {
                let start = if fr.block[c - 1] == 0 { c - 2 } else { c - 1 };
                let width = if fr.block[start] == 2 { 2 } else { 1 };
                for t in 0..k {
                    let ys = &mut y[t * f..(t + 1) * f];
                    for q in start..start + width {
                        let l = col(q);
                        let mut acc = ZERO;
                        for i in start + width..f {
                            acc += l[i].conj() * ys[i];
                        }
                        ys[q] -= acc;
                    }
                }
                c = start;
            }
            scatter(fr, x, n, k, &y, fr.s);
        }
    }
}

fn gather(fr: &FrontFactor, x: &[Complex64], n: usize, k: usize, y: &mut Vec<Complex64>) {
    let f = fr.index.len();
    y.clear();
    y.reserve(f * k);
    for t in 0..k {
        let xs = &x[t * n..(t + 1) * n];
        y.extend(fr.index.iter().map(|&g| xs[g]));
    }
}

fn scatter(fr: &FrontFactor, x: &mut [Complex64], n: usize, k: usize, y: &[Complex64], rows: usize) {
    let f = fr.index.len();
    for t in 0..k {
        let xs = &mut x[t * n..(t + 1) * n];
        for (r, &g) in fr.index[..rows].iter().enumerate() {
            xs[g] = y[t * f + r];
        }
    }
}

#[cfg(test)]
mod tests {
    use landau_dense_oracle::{count_below, hermitian_eigenvalues};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::nested::tests::grid_laplacian;

    fn random_dense(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                };
                a[i * n + j] = v;
                a[j * n + i] = v.conj();
            }
        }
        a
    }

    fn factor(h: &SparseHermitian, sigma: f64) -> Result<(Ldl, Analysis), Breakdown> {
        let a = Analysis::new(h);
        Ldl::factor(h, &a, sigma).map(|f| (f, a))
    }

    /// Max-norm residual of `(A - σ) x = b` after solving through `f`.
    fn solve_residual(h: &SparseHermitian, f: &Ldl, a: &Analysis, sigma: f64, k: usize) -> f64 {
        let n = h.dim();
        let b: Vec<Complex64> = (0..n * k)
            .map(|i| Complex64::new((i % 7) as f64 - 3.0, (i % 3) as f64))
            .collect();
        let mut x = vec![ZERO; n * k];
        for t in 0..k {
            for new in 0..n {
                x[t * n + new] = b[t * n + a.perm[new]];
            }
        }
        f.solve_permuted(&mut x, k);
        let mut worst: f64 = 0.0;
        for t in 0..k {
            let mut xo = vec![ZERO; n];
            for new in 0..n {
                xo[a.perm[new]] = x[t * n + new];
            }
            let mut ax = vec![ZERO; n];
            h.matvec(&xo, &mut ax);
            for i in 0..n {
                worst = worst.max((ax[i] - xo[i] * sigma - b[t * n + i]).norm());
            }
        }
        worst
    }

    #[test]
    fn diagonal_inertia() {
        let h = SparseHermitian::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(factor(&h, 3.5).unwrap().0.negative_count(), 3);
    }

    #[test]
    fn exact_eigenvalue_breaks_down() {
        let h = SparseHermitian::diagonal(&[1.0, 2.0, 3.0]);
        assert!(matches!(factor(&h, 2.0), Err(Breakdown::SmallPivot { .. })));
    }

    #[test]
    fn zero_diagonal_needs_two_by_two() {
        // [[0, 1], [1, 0]] has eigenvalues ±1.
        let h =
            SparseHermitian::from_lower_triplets(2, &[(0, 0, ZERO), (1, 0, Complex64::new(1.0, 0.0)), (1, 1, ZERO)])
                .unwrap();
        let (f, a) = factor(&h, 0.0).unwrap();
        assert_eq!(f.negative_count(), 1);
        assert!(solve_residual(&h, &f, &a, 0.0, 1) < 1e-14);
    }

    #[test]
    fn interchange_rescues_small_leading_pivot() {
        // Tiny (1,1) entry: the pivot search swaps or pairs it.
        let e = 1e-15;
        let c = |re: f64| Complex64::new(re, 0.0);
        let h = SparseHermitian::from_lower_triplets(
            3,
            &[
                (0, 0, c(e)),
                (1, 0, c(1.0)),
                (1, 1, c(2.0)),
                (2, 1, c(0.5)),
                (2, 2, c(-3.0)),
                (2, 0, c(0.3)),
            ],
        )
        .unwrap();
        let eigs = hermitian_eigenvalues(3, &h.to_dense());
        let (f, a) = factor(&h, 0.0).unwrap();
        assert_eq!(f.negative_count(), count_below(&eigs, 0.0));
        assert!(f.max_growth() < 10.0);
        assert!(solve_residual(&h, &f, &a, 0.0, 2) < 1e-12);
    }

    #[test]
    fn random_dense_inertia_and_solve() {
        let n = 60;
        let a = random_dense(n, 7);
        let h = SparseHermitian::from_dense_lower(n, &a);
        let eigs = hermitian_eigenvalues(n, &a);
        for sigma in [-1.0, -0.2, 0.1, 0.9] {
            let (f, an) = factor(&h, sigma).unwrap();
            assert_eq!(f.negative_count(), count_below(&eigs, sigma), "sigma {sigma}");
            let r = solve_residual(&h, &f, &an, sigma, 2);
            assert!(r < 1e-8, "residual {r}");
        }
    }

    #[test]
    fn indefinite_grid_operator() {
        // Shifted torus Laplacian with a random Hermitian perturbation on
        // the edges: many fronts, indefinite throughout.
        let base = grid_laplacian(30, 30, true);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t: Vec<(usize, usize, Complex64)> = base
            .lower_triplets()
            .into_iter()
            .map(|(i, j, v)| {
                if i == j {
                    (i, j, v + rng.gen_range(-0.5..0.5))
                } else {
                    (
                        i,
                        j,
                        v * Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)),
                    )
                }
            })
            .collect();
        let h = SparseHermitian::from_lower_triplets(900, &t).unwrap();
        let eigs = hermitian_eigenvalues(900, &h.to_dense());
        for sigma in [0.3, 2.7, 4.05, 6.6] {
            let (f, a) = factor(&h, sigma).unwrap();
            assert_eq!(f.negative_count(), count_below(&eigs, sigma), "sigma {sigma}");
            let r = solve_residual(&h, &f, &a, sigma, 3);
            assert!(r < 1e-8, "residual {r}");
            assert!(f.stored_entries() < 900 * 120, "{}", f.stored_entries());
            if sigma == 4.05 {
                assert!(f.delayed_pivots() > 0);
            }
        }
    }
}
