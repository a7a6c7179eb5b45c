//! `tr φ(H)` from eigenvalues, or from the counting function
//! `tr φ(H) = -∫ φ'(λ) N(λ) dλ` when there are too many of them.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::eigs::{eigenpairs_with, EigsOptions};
use super::slice::{Eigenpair, Slicer};
use crate::error::Result;
use crate::predictor::TestFunction;

/// Eigenpairs are used up to this many eigenvalues in `supp φ`.
pub const EIGENPAIR_LIMIT: usize = 512;
/// Relative accuracy of the counting-function integral.
pub const COUNTING_RELATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    Eigenpairs,
    CountingIntegral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub value: f64,
    pub method: TraceMethod,
    /// Eigenvalues in `supp φ`.
    pub count: usize,
    /// Inertia evaluations used by the counting method.
    pub inertia_evaluations: usize,
    /// Bound on the quadrature error of the counting method (0 for eigenpairs).
    pub error_bound: f64,
    #[serde(skip)]
    pub eigenpairs: Vec<Eigenpair>,
}

/// `tr φ(H)`. With `method = None` the eigenpair method is chosen when at
/// most [`EIGENPAIR_LIMIT`] eigenvalues lie in `supp φ`.
pub fn trace_phi(
    slicer: &Slicer,
    phi: &TestFunction,
    method: Option<TraceMethod>,
    opts: &EigsOptions,
) -> Result<TraceResult> {
    let support = phi.support();
    let count = slicer.count_interval(support)?.count;
    let method = method.unwrap_or(if count <= EIGENPAIR_LIMIT {
        TraceMethod::Eigenpairs
    } else {
        TraceMethod::CountingIntegral
    });
    match method {
        TraceMethod::Eigenpairs => {
            let opts = EigsOptions {
                max_m: opts.max_m.max(count),
                ..opts.clone()
            };
            let slice = eigenpairs_with(slicer, support, &opts)?;
            let pairs = slice.eigenpairs.unwrap_or_default();
            let value = pairs.iter().map(|p| phi.eval(p.value)).sum();
            Ok(TraceResult {
                value,
                method,
                count: pairs.len(),
                inertia_evaluations: 0,
                error_bound: 0.0,
                eigenpairs: pairs,
            })
        }
        TraceMethod::CountingIntegral => counting_integral(slicer, phi, count),
    }
}

struct Counter<'s, 'a> {
    slicer: &'s Slicer<'a>,
    cache: RefCell<BTreeMap<u64, usize>>,
}

impl Counter<'_, '_> {
    fn at(&self, lambda: f64) -> Result<usize> {
        if let Some(&n) = self.cache.borrow().get(&lambda.to_bits()) {
            return Ok(n);
        }
        let (n, _) = self.slicer.inertia(lambda)?;
        self.cache.borrow_mut().insert(lambda.to_bits(), n);
        Ok(n)
    }
}

/// Integral of `-φ' N` over `[a, b]`. Where `N(a) = N(b)` the counting
/// function is constant and the piece is exact; otherwise the interval is
/// halved until the eigenvalues inside are located finely enough for
/// `φ(midpoint)` to stand in for `φ(λ)`.
fn integrate(
    counter: &Counter,
    phi: &TestFunction,
    (a, na): (f64, usize),
    (b, nb): (f64, usize),
    tol: f64,
    bound: &mut f64,
) -> Result<f64> {
    if na == nb {
        return Ok(na as f64 * (phi.eval(a) - phi.eval(b)));
    }
    let jumps = (nb - na) as f64;
    let mid = 0.5 * (a + b);
    let err = jumps * phi.derivative_bound() * 0.5 * (b - a);
    if err <= tol || mid <= a || mid >= b {
        *bound += err;
        return Ok(na as f64 * phi.eval(a) - nb as f64 * phi.eval(b) + jumps * phi.eval(mid));
    }
    let nm = counter.at(mid)?.clamp(na, nb);
    let left = integrate(counter, phi, (a, na), (mid, nm), tol * 0.5, bound)?;
    let right = integrate(counter, phi, (mid, nm), (b, nb), tol * 0.5, bound)?;
    Ok(left + right)
}

fn counting_integral(slicer: &Slicer, phi: &TestFunction, count: usize) -> Result<TraceResult> {
    let counter = Counter {
        slicer,
        cache: RefCell::new(BTreeMap::new()),
    };
    let (alpha, beta) = phi.support();
    let ends = ((alpha, counter.at(alpha)?), (beta, counter.at(beta)?));
    // A coarse pass sets the scale for the relative tolerance.
    let mut coarse_bound = 0.0;
    let coarse = integrate(
        &counter,
        phi,
        ends.0,
        ends.1,
        1e-3 * count.max(1) as f64,
        &mut coarse_bound,
    )?;
    let scale = coarse.abs().max(coarse_bound).max(f64::MIN_POSITIVE);
    let mut bound = 0.0;
    let value = integrate(
        &counter,
        phi,
        ends.0,
        ends.1,
        COUNTING_RELATIVE_TOLERANCE * scale,
        &mut bound,
    )?;
    let evaluations = counter.cache.borrow().len();
    Ok(TraceResult {
        value,
        method: TraceMethod::CountingIntegral,
        count,
        inertia_evaluations: evaluations,
        error_bound: bound,
        eigenpairs: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::SparseHermitian;

    #[test]
    fn diagonal_trace_both_methods() {
        let h = SparseHermitian::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let s = Slicer::new(&h);
        let phi = TestFunction::bump(1.5, 4.5);
        let want = phi.eval(2.0) + phi.eval(3.0) + phi.eval(4.0);
        let eig = trace_phi(&s, &phi, None, &EigsOptions::default()).unwrap();
        assert_eq!(eig.method, TraceMethod::Eigenpairs);
        assert!((eig.value - want).abs() < 1e-12);
        let int = trace_phi(&s, &phi, Some(TraceMethod::CountingIntegral), &EigsOptions::default()).unwrap();
        assert!((int.value - want).abs() <= 1e-6 * want, "{} vs {want}", int.value);
        assert!(int.error_bound <= 1e-6 * want);
    }

    #[test]
    fn gap_trace_is_zero() {
        let h = SparseHermitian::diagonal(&[1.0, 3.0]);
        let s = Slicer::new(&h);
        let phi = TestFunction::bump(1.5, 2.5);
        for m in [TraceMethod::Eigenpairs, TraceMethod::CountingIntegral] {
            assert_eq!(
                trace_phi(&s, &phi, Some(m), &EigsOptions::default()).unwrap().value,
                0.0
            );
        }
    }

    #[test]
    fn linearity_over_supports() {
        let diag: Vec<f64> = (0..40).map(|i| 0.05 * i as f64).collect();
        let h = SparseHermitian::diagonal(&diag);
        let s = Slicer::new(&h);
        let (p1, p2) = (TestFunction::bump(0.1, 0.9), TestFunction::bump(0.7, 1.6));
        let t1 = trace_phi(&s, &p1, None, &EigsOptions::default()).unwrap().value;
        let t2 = trace_phi(&s, &p2, None, &EigsOptions::default()).unwrap().value;
        let direct: f64 = diag.iter().map(|&l| p1.eval(l) + p2.eval(l)).sum();
        assert!((t1 + t2 - direct).abs() < 1e-12, "{}", t1 + t2 - direct);
    }
}
