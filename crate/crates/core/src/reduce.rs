//! Order-stable reductions.
//!
//! Every quadrature in the crate funnels through [`pairwise_sum`], whose
//! split points depend only on the slice length. Results are therefore
//! bitwise reproducible no matter how the summands were produced.

const LEAF: usize = 16;

/// Pairwise (tree) summation with a fixed topology.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n`, evaluated in parallel.
pub fn pairwise_sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    let terms: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let v: Vec<f64> = (0..10_007).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = pairwise_sum(&v);
        let b = pairwise_sum_by(v.len(), |i| v[i]);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
