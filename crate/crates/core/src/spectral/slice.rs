//! Eigenvalue counting by inertia, with a fixed shift-perturbation schedule.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ldl::Ldl;
use super::nested::Analysis;
use crate::discretize::SparseHermitian;
use crate::error::{Error, Result};

/// Perturbation attempts after the requested shift breaks down.
pub const MAX_SHIFT_RETRIES: u32 = 5;
/// Base relative size of a shift perturbation.
pub const SHIFT_STEP: f64 = 1e-8;

/// Shift actually used for a factorization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub requested: f64,
    pub used: f64,
    /// Perturbations applied before a factorization succeeded.
    pub retries: u32,
}

/// `σ_t = σ + (-1)^{t+1} 10^{-8} (1 + |σ|) 10^{t-1}` for retry `t = 1..=5`.
pub fn perturbed_shift(sigma: f64, retry: u32) -> f64 {
    if retry == 0 {
        return sigma;
    }
    let sign = if retry % 2 == 1 { 1.0 } else { -1.0 };
    sigma + sign * SHIFT_STEP * (1.0 + sigma.abs()) * 10f64.powi(retry as i32 - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceMethod {
    Inertia,
    Eigenpairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub value: f64,
    /// `‖H u - λ u‖` for the unit vector `u`.
    pub residual: f64,
    #[serde(skip)]
    pub vector: Vec<Complex64>,
}

/// An interval together with its eigenvalue count and optionally the
/// eigenpairs inside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSlice {
    pub interval: (f64, f64),
    pub count: usize,
    pub method: SliceMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenpairs: Option<Vec<Eigenpair>>,
    pub shift_log: Vec<ShiftRecord>,
}

impl SpectralSlice {
    pub fn values(&self) -> Vec<f64> {
        self.eigenpairs
            .as_ref()
            .map(|p| p.iter().map(|e| e.value).collect())
            .unwrap_or_default()
    }
}

/// A Hermitian matrix with its fill-reducing analysis, ready for repeated
/// shifted factorizations.
pub struct Slicer<'a> {
    h: &'a SparseHermitian,
    analysis: Analysis,
}

impl<'a> Slicer<'a> {
    pub fn new(h: &'a SparseHermitian) -> Slicer<'a> {
        Slicer {
            h,
            analysis: Analysis::new(h),
        }
    }

    pub fn matrix(&self) -> &SparseHermitian {
        self.h
    }

    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    /// Factors `H - σ I`, perturbing `σ` on breakdown.
    pub fn factor(&self, sigma: f64) -> Result<(Ldl, ShiftRecord)> {
        for retry in 0..=MAX_SHIFT_RETRIES {
            let used = perturbed_shift(sigma, retry);
            match Ldl::factor(self.h, &self.analysis, used) {
                Ok(f) => {
                    if retry > 0 {
                        log::debug!("shift {sigma} perturbed to {used} after {retry} retries");
                    }
                    return Ok((
                        f,
                        ShiftRecord {
                            requested: sigma,
                            used,
                            retries: retry,
                        },
                    ));
                }
                Err(b) => log::debug!("factorization at {used} broke down: {b:?}"),
            }
        }
        Err(Error::FactorizationFailure {
            sigma,
            attempts: MAX_SHIFT_RETRIES as usize + 1,
        })
    }

    /// Number of eigenvalues below `σ`.
    pub fn inertia(&self, sigma: f64) -> Result<(usize, ShiftRecord)> {
        let (f, rec) = self.factor(sigma)?;
        Ok((f.negative_count(), rec))
    }

    /// `N([α, β]) = inertia(β) - inertia(α)`.
    pub fn count_interval(&self, interval: (f64, f64)) -> Result<SpectralSlice> {
        let (a, b) = interval;
        if !(a < b) {
            return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
        }
        let (na, ra) = self.inertia(a)?;
        let (nb, rb) = self.inertia(b)?;
        Ok(SpectralSlice {
            interval,
            count: nb.saturating_sub(na),
            method: SliceMethod::Inertia,
            eigenpairs: None,
            shift_log: vec![ra, rb],
        })
    }

    /// Solves `(H - σ I) X = B` in place for `k` columns in original order.
    pub fn solve(&self, f: &Ldl, x: &mut [Complex64], k: usize) {
        let n = self.h.dim();
        let mut permuted = vec![Complex64::new(0.0, 0.0); n * k];
        for t in 0..k {
            for (new, &old) in self.analysis.perm.iter().enumerate() {
                permuted[t * n + new] = x[t * n + old];
            }
        }
        f.solve_permuted(&mut permuted, k);
        for t in 0..k {
            for (new, &old) in self.analysis.perm.iter().enumerate() {
                x[t * n + old] = permuted[t * n + new];
            }
        }
    }
}

/// Number of eigenvalues of `h` below `σ`.
pub fn inertia(h: &SparseHermitian, sigma: f64) -> Result<usize> {
    Slicer::new(h).inertia(sigma).map(|(n, _)| n)
}

pub fn count_interval(h: &SparseHermitian, interval: (f64, f64)) -> Result<SpectralSlice> {
    Slicer::new(h).count_interval(interval)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn diagonal_examples() {
        let h = SparseHermitian::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(inertia(&h, 3.5).unwrap(), 3);
        assert_eq!(count_interval(&h, (1.5, 4.5)).unwrap().count, 3);
    }

    #[test]
    fn shift_on_eigenvalue_is_perturbed() {
        let h = SparseHermitian::diagonal(&[1.0, 2.0, 3.0]);
        let (n, rec) = Slicer::new(&h).inertia(2.0).unwrap();
        assert_eq!(rec.retries, 1);
        assert!(rec.used > 2.0);
        assert_eq!(n, 2);
    }

    #[test]
    fn retry_schedule() {
        let s = 1.0;
        let got: Vec<f64> = (1..=5).map(|t| perturbed_shift(s, t) - s).collect();
        let want = [2e-8, -2e-7, 2e-6, -2e-5, 2e-4];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-6 * w.abs(), "{g} vs {w}");
        }
    }

    #[test]
    fn free_dirichlet_laplacian_count() {
        // 16x16 interior grid on the unit square: eigenvalues
        // (2 - 2cos(πi h) + 2 - 2cos(πj h)) / h².
        let n = 16;
        let h = 1.0 / (n + 1) as f64;
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = i + n * j;
                t.push((v, v, Complex64::new(4.0 / (h * h), 0.0)));
                if i > 0 {
                    t.push((v, v - 1, Complex64::new(-1.0 / (h * h), 0.0)));
                }
                if j > 0 {
                    t.push((v, v - n, Complex64::new(-1.0 / (h * h), 0.0)));
                }
            }
        }
        let m = SparseHermitian::from_lower_triplets(n * n, &t).unwrap();
        let lam =
            |i: usize, j: usize| (4.0 - 2.0 * (PI * i as f64 * h).cos() - 2.0 * (PI * j as f64 * h).cos()) / (h * h);
        let sigma = 0.5 * (lam(1, 1) + lam(1, 2));
        assert_eq!(inertia(&m, sigma).unwrap(), 1);
        assert_eq!(inertia(&m, 0.5 * (lam(1, 2) + lam(2, 2))).unwrap(), 3);
    }
}
