//! Cross-checks Matrix Market output against scipy, skipped without Python.

use std::process::Command;

use landau_core::discretize::{build_operator, write_matrix};
use landau_core::model::{Grid, ModelSpec};
use landau_core::spectral::Slicer;

const SCRIPT: &str = r#"
import json, sys
import numpy as np
from scipy.io import mmread
a = mmread(sys.argv[1]).toarray()
print(json.dumps({
    "hermitian": bool(np.allclose(a, a.conj().T)),
    "eigenvalues": np.linalg.eigvalsh(a).tolist(),
}))
"#;

fn scipy_available() -> bool {
    Command::new("python3")
        .args(["-c", "import scipy, numpy"])
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn scipy_reads_the_same_spectrum() {
    if !scipy_available() {
        eprintln!("python3 with scipy not found; skipping");
        return;
    }
    let spec = ModelSpec::from_json_str(
        r#"{"domain": {"kind": "rectangle", "lengths": [3, 3]}, "b": "1 + 0.2*x1",
            "potential": "-0.8*exp(-r2/2)", "b0": 1}"#,
    )
    .unwrap();
    let grid = Grid::new(&spec.domain, &[32, 32]).unwrap();
    let h = build_operator(&spec, &grid, 1).unwrap().matrix;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.mtx");
    write_matrix(&h, &path).unwrap();

    let out = Command::new("python3")
        .args(["-c", SCRIPT])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["hermitian"], serde_json::json!(true));
    let theirs: Vec<f64> = serde_json::from_value(v["eigenvalues"].clone()).unwrap();
    assert_eq!(theirs.len(), h.dim());

    let ours = landau_dense_oracle::hermitian_eigenvalues(h.dim(), &h.to_dense());
    for (a, b) in ours.iter().zip(&theirs) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
    let slicer = Slicer::new(&h);
    for k in [1, 10, 50, 200, 360] {
        let sigma = 0.5 * (theirs[k - 1] + theirs[k]);
        assert_eq!(slicer.inertia(sigma).unwrap().0, k);
    }
}
