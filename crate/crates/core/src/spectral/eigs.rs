//! Eigenpairs in an interval by block shift-invert subspace iteration with
//! Rayleigh–Ritz extraction.
//!
//! Each iteration builds `Q = orth[X, K X, K² X]` with `K = (H - σ)^{-1}`,
//! projects `H` onto it and keeps the `m` Ritz pairs closest to `σ` as the
//! next block. The block is larger than the inertia count, so degenerate
//! clusters are captured. Wide intervals are cut into slices by inertia
//! bisection, each with its own shift.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::{adjoint_product, product, sub_product};
use super::slice::{Eigenpair, ShiftRecord, SliceMethod, Slicer, SpectralSlice};
use crate::discretize::SparseHermitian;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigsOptions {
    /// Refuse intervals holding more eigenvalues than this.
    pub max_m: usize,
    /// Residual bound `‖Hu - λu‖ <= tol` for unit `u`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Preferred number of eigenvalues per shift.
    pub slice_target: usize,
    /// Number of Krylov blocks `X, KX, ...` per iteration.
    pub krylov_depth: usize,
    pub seed: u64,
}

impl Default for EigsOptions {
    fn default() -> Self {
        EigsOptions {
            max_m: 512,
            tolerance: 1e-8,
            max_iterations: 100,
            slice_target: 32,
            krylov_depth: 3,
            seed: 0x5eed,
        }
    }
}

/// All eigenpairs of `h` in `[α, β]`, validated against the inertia count.
pub fn eigenpairs_in_interval(h: &SparseHermitian, interval: (f64, f64), opts: &EigsOptions) -> Result<SpectralSlice> {
    let slicer = Slicer::new(h);
    eigenpairs_with(&slicer, interval, opts)
}

/// [`eigenpairs_in_interval`] reusing an existing [`Slicer`].
pub fn eigenpairs_with(slicer: &Slicer, interval: (f64, f64), opts: &EigsOptions) -> Result<SpectralSlice> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
    }
    let (na, ra) = slicer.inertia(a)?;
    let (nb, rb) = slicer.inertia(b)?;
    let count = nb.saturating_sub(na);
    if count > opts.max_m {
        return Err(Error::TooManyEigenvalues {
            count,
            max_m: opts.max_m,
        });
    }
    let mut shift_log = vec![ra, rb];
    let mut pairs = Vec::with_capacity(count);
    if count > 0 {
        let mut slices = Vec::new();
        bisect(
            slicer,
            (ra.used, na),
            (rb.used, nb),
            opts.slice_target,
            &mut slices,
            &mut shift_log,
        )?;
        for (index, &((lo, n_lo), (hi, n_hi))) in slices.iter().enumerate() {
            let expected = n_hi - n_lo;
            if expected == 0 {
                continue;
            }
            let seed = opts.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let (found, rec) = solve_slice(slicer, (lo, hi), expected, seed, opts)?;
            shift_log.push(rec);
            pairs.extend(found);
        }
    }
    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
    Ok(SpectralSlice {
        interval,
        count,
        method: SliceMethod::Eigenpairs,
        eigenpairs: Some(pairs),
        shift_log,
    })
}

type Endpoint = (f64, usize);

fn bisect(
    slicer: &Slicer,
    lo: Endpoint,
    hi: Endpoint,
    target: usize,
    out: &mut Vec<(Endpoint, Endpoint)>,
    log: &mut Vec<ShiftRecord>,
) -> Result<()> {
    let count = hi.1 - lo.1;
    let width = hi.0 - lo.0;
    if count <= target.max(1) || width <= 1e-10 * (1.0 + lo.0.abs().max(hi.0.abs())) {
        out.push((lo, hi));
        return Ok(());
    }
    let (n_mid, rec) = slicer.inertia(0.5 * (lo.0 + hi.0))?;
    log.push(rec);
    let mid = (rec.used, n_mid.clamp(lo.1, hi.1));
    bisect(slicer, lo, mid, target, out, log)?;
    bisect(slicer, mid, hi, target, out, log)
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// A unit column whose projection onto the basis complement is no longer
/// than this is treated as lying in the span.
const DROP_TOLERANCE: f64 = 1e-10;
/// Gram eigenvalues of unit columns below this mark mutual dependence.
const DEPENDENCE_TOLERANCE: f64 = 1e-14;
const MAX_ORTHOGONALIZATION_PASSES: usize = 5;

/// Orthonormal columns, stored column-major.
struct Basis {
    n: usize,
    k: usize,
    data: Vec<Complex64>,
}

impl Basis {
    fn new(n: usize) -> Basis {
        Basis {
            n,
            k: 0,
            data: Vec::new(),
        }
    }

    fn columns(&self, from: usize) -> &[Complex64] {
        &self.data[from * self.n..]
    }

    /// Appends an orthonormal basis for the part of `block` (`b` columns)
    /// outside the current span; returns the number of columns added.
    ///
    /// Each pass projects out the basis, drops columns that keep no more
    /// than [`DROP_TOLERANCE`] of their norm, rescales the rest and
    /// orthonormalizes them through their Gram matrix. Passes repeat until
    /// one neither shrinks nor rescales any column much, which leaves the
    /// block orthogonal to the basis to working precision.
    fn extend(&mut self, block: Vec<Complex64>, b: usize) -> usize {
        let n = self.n;
        debug_assert_eq!(block.len(), n * b);
        let mut block = unit_columns(block, n, 0.0).0;
        for _ in 0..MAX_ORTHOGONALIZATION_PASSES {
            let mut b = block.len() / n.max(1);
            if b == 0 {
                return 0;
            }
            let mut shrink: f64 = 1.0;
            if self.k > 0 {
                let c = adjoint_product(&self.data, &block, n, self.k, b);
                sub_product(&mut block, &self.data, &c, n, self.k, b);
                let (unit, least) = unit_columns(block, n, DROP_TOLERANCE);
                block = unit;
                shrink = least;
                b = block.len() / n;
                if b == 0 {
                    return 0;
                }
            }
            let g = adjoint_product(&block, &block, n, b, b);
            let mut gm = DMatrix::<Complex64>::from_column_slice(b, b, &g);
            gm = (&gm + gm.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = gm.symmetric_eigen();
            let keep: Vec<usize> = (0..b).filter(|&i| eig.eigenvalues[i] > DEPENDENCE_TOLERANCE).collect();
            let smallest = keep.iter().map(|&i| eig.eigenvalues[i]).fold(f64::INFINITY, f64::min);
            let mut w = Vec::with_capacity(b * keep.len());
            for &i in &keep {
                let scale = 1.0 / eig.eigenvalues[i].sqrt();
                w.extend(eig.eigenvectors.column(i).iter().map(|x| x * scale));
            }
            block = product(&block, &w, n, b, keep.len());
            if shrink >= 0.5 && smallest >= 0.25 {
                break;
            }
        }
        let added = block.len() / n.max(1);
        self.data.extend_from_slice(&block);
        self.k += added;
        added
    }
}

/// Columns rescaled to unit norm, without those of norm at most
/// `tolerance`, and the smallest norm among the survivors.
fn unit_columns(block: Vec<Complex64>, n: usize, tolerance: f64) -> (Vec<Complex64>, f64) {
    let mut out = Vec::with_capacity(block.len());
    let mut least = f64::INFINITY;
    for c in block.chunks(n) {
        let nc = norm(c);
        if nc > tolerance && nc > 0.0 {
            least = least.min(nc);
            out.extend(c.iter().map(|x| x / nc));
        }
    }
    (out, least)
}

fn random_block(n: usize, m: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * m)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

struct Ritz {
    values: Vec<f64>,
    residuals: Vec<f64>,
    /// Unit Ritz vectors, column-major `n × values.len()`.
    vectors: Vec<Complex64>,
}

fn solve_slice(
    slicer: &Slicer,
    interval: (f64, f64),
    expected: usize,
    seed: u64,
    opts: &EigsOptions,
) -> Result<(Vec<Eigenpair>, ShiftRecord)> {
    let h = slicer.matrix();
    let n = h.dim();
    let (lo, hi) = interval;
    let (f, rec) = slicer.factor(0.5 * (lo + hi))?;
    let sigma = rec.used;
    let m = (expected + (expected / 2).max(4)).min(n);

    let mut block = random_block(n, m, seed);
    let mut block_cols = m;
    let mut best_residual = f64::INFINITY;
    let mut best_converged = 0;
    for iteration in 1..=opts.max_iterations {
        let mut basis = Basis::new(n);
        let mut fresh = basis.extend(block, block_cols);
        for _ in 1..opts.krylov_depth.max(1) {
            if fresh == 0 || basis.k >= n {
                break;
            }
            let mut next = basis.columns(basis.k - fresh).to_vec();
            slicer.solve(&f, &mut next, fresh);
            fresh = basis.extend(next, fresh);
        }
        let ritz = rayleigh_ritz(h, &basis, sigma, m);
        let inside: Vec<usize> = (0..ritz.values.len())
            .filter(|&j| ritz.values[j] >= lo && ritz.values[j] <= hi)
            .collect();
        let worst = inside.iter().map(|&j| ritz.residuals[j]).fold(0.0, f64::max);
        let converged = inside.iter().filter(|&&j| ritz.residuals[j] <= opts.tolerance).count();
        if converged > best_converged || (converged == best_converged && worst < best_residual) {
            best_converged = converged;
            best_residual = worst;
        }
        if inside.len() == expected && converged == expected {
            log::debug!("slice [{lo}, {hi}]: {expected} pairs after {iteration} iterations (max residual {worst:.2e})");
            let pairs = inside
                .into_iter()
                .map(|j| Eigenpair {
                    value: ritz.values[j],
                    residual: ritz.residuals[j],
                    vector: ritz.vectors[j * n..(j + 1) * n].to_vec(),
                })
                .collect();
            return Ok((pairs, rec));
        }
        block_cols = ritz.values.len();
        block = ritz.vectors;
    }
    Err(Error::ConvergenceFailure {
        iterations: opts.max_iterations,
        converged: best_converged,
        expected,
        max_residual: best_residual,
    })
}

/// Ritz pairs of `h` on the span of `basis`, the `m` closest to `sigma`.
fn rayleigh_ritz(h: &SparseHermitian, basis: &Basis, sigma: f64, m: usize) -> Ritz {
    let n = basis.n;
    let k = basis.k;
    let mut hq = vec![ZERO; n * k];
    for (q, y) in basis.data.chunks(n).zip(hq.chunks_mut(n)) {
        h.matvec(q, y);
    }
    let t = adjoint_product(&basis.data, &hq, n, k, k);
    let mut t = DMatrix::<Complex64>::from_column_slice(k, k, &t);
    t = (&t + t.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| {
        (eig.eigenvalues[x] - sigma)
            .abs()
            .total_cmp(&(eig.eigenvalues[y] - sigma).abs())
    });
    order.truncate(m.min(k));
    let r = order.len();
    let mut y = Vec::with_capacity(k * r);
    for &idx in &order {
        y.extend(eig.eigenvectors.column(idx).iter().copied());
    }
    let mut u = product(&basis.data, &y, n, k, r);
    let mut hu = product(&hq, &y, n, k, r);
    let mut values = Vec::with_capacity(r);
    let mut residuals = Vec::with_capacity(r);
    for (j, &idx) in order.iter().enumerate() {
        let value = eig.eigenvalues[idx];
        let uj = &mut u[j * n..(j + 1) * n];
        let huj = &mut hu[j * n..(j + 1) * n];
        let unorm = norm(uj);
        uj.iter_mut().for_each(|x| *x /= unorm);
        huj.iter_mut().for_each(|x| *x /= unorm);
        let residual = huj
            .iter()
            .zip(uj.iter())
            .map(|(a, b)| (a - b * value).norm_sqr())
            .sum::<f64>()
            .sqrt();
        values.push(value);
        residuals.push(residual);
    }
    Ritz {
        values,
        residuals,
        vectors: u,
    }
}
