//! Shared fixtures for the benchmarks.

use landau_core::discretize::{build_operator, Operator};
use landau_core::model::{Grid, ModelSpec};

/// Side of the variable-field torus, chosen so the total flux is `2π`.
pub fn side() -> f64 {
    (2.0 * std::f64::consts::PI).sqrt()
}

/// Torus with `b = 1 + 0.3 cos cos`.
pub fn variable_field() -> ModelSpec {
    let l = side();
    ModelSpec::from_json_str(&format!(
        r#"{{"domain": {{"kind": "torus", "lengths": [{l}, {l}]}}, "params": {{"L": {l}}},
            "b": "1 + 0.3*cos(2*pi*x1/L)*cos(2*pi*x2/L)", "b0": 0.7}}"#
    ))
    .expect("benchmark model parses")
}

/// Operator at `p` on the smallest gate-compliant grid (a multiple of 4).
pub fn operator(p: u32) -> Operator {
    let spec = variable_field();
    let n = ((8.0 * side() * (1.3 * p as f64).sqrt()).ceil() as usize).div_ceil(4) * 4;
    let grid = Grid::new(&spec.domain, &[n, n]).expect("grid");
    build_operator(&spec, &grid, p).expect("operator")
}
