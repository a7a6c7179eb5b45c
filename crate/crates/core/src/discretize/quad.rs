//! Adaptive Gauss–Legendre quadrature for edge phases.

const NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_85,
];

/// Successive estimates must agree to this absolute tolerance.
pub const QUAD_TOLERANCE: f64 = 1e-12;
const MAX_DEPTH: u32 = 40;

/// 4-point Gauss rule on `[a, b]`.
pub fn gauss4<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in NODES.iter().zip(&WEIGHTS) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive 4-point Gauss: an interval is accepted when its estimate agrees
/// with the sum over its two halves within `tol`.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gauss4(f, a, b);
    refine(f, a, b, whole, tol, 0)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss4(f, a, mid);
    let right = gauss4(f, mid, b);
    let split = left + right;
    if (split - whole).abs() <= tol || depth >= MAX_DEPTH {
        return split;
    }
    refine(f, a, mid, left, 0.5 * tol, depth + 1) + refine(f, mid, b, right, 0.5 * tol, depth + 1)
}

/// Composite 4-point Gauss nodes and weights for `pieces` equal subintervals.
pub fn composite_rule(a: f64, b: f64, pieces: usize) -> Vec<(f64, f64)> {
    let width = (b - a) / pieces as f64;
    let mut out = Vec::with_capacity(4 * pieces);
    for piece in 0..pieces {
        let lo = a + piece as f64 * width;
        let mid = lo + 0.5 * width;
        for (x, w) in NODES.iter().zip(&WEIGHTS) {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}
