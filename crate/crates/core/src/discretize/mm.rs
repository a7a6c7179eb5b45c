//! Matrix Market coordinate files for Hermitian matrices.
//!
//! Writes `%%MatrixMarket matrix coordinate complex hermitian`, one comment
//! line, the size line, then the lower triangle in row-major order with
//! 1-based indices. Floats use Rust's shortest round-trip formatting, so a
//! write–read–write cycle reproduces the file byte for byte.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use super::sparse::SparseHermitian;
use crate::error::{Error, Result};

pub const HEADER: &str = "%%MatrixMarket matrix coordinate complex hermitian";
const COMMENT: &str = "% lower triangle, row-major, 1-based";

/// Serializes `h` to Matrix Market text.
pub fn to_string(h: &SparseHermitian) -> String {
    let lower = h.lower_triplets();
    let mut out = String::with_capacity(48 * lower.len() + 128);
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(COMMENT);
    out.push('\n');
    out.push_str(&format!("{} {} {}\n", h.dim(), h.dim(), lower.len()));
    for (i, j, v) in lower {
        out.push_str(&format!("{} {} {:e} {:e}\n", i + 1, j + 1, v.re, v.im));
    }
    out
}

pub fn write_matrix(h: &SparseHermitian, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_string(h).as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<SparseHermitian> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

/// Parses `complex hermitian` or `real symmetric` coordinate files. Upper
/// triangle entries are conjugated into the lower triangle.
pub fn parse(text: &str, path: &Path) -> Result<SparseHermitian> {
    let err = |line: usize, message: String| Error::MatrixMarket {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(err(1, format!("unsupported header `{header}`")));
    }
    let complex = match (fields[3].as_str(), fields[4].as_str()) {
        ("complex", "hermitian") => true,
        ("real", "symmetric") => false,
        (f, s) => return Err(err(1, format!("unsupported field/symmetry `{f} {s}`"))),
    };
    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(err(lineno, "size line needs `rows cols entries`".into()));
                }
                let nums: Vec<usize> = parts
                    .iter()
                    .map(|s| s.parse().map_err(|_| err(lineno, format!("bad integer `{s}`"))))
                    .collect::<Result<_>>()?;
                if nums[0] != nums[1] {
                    return Err(err(lineno, "matrix is not square".into()));
                }
                size = Some((nums[0], nums[2]));
                triplets.reserve(nums[2]);
            }
            Some((n, _)) => {
                let want = if complex { 4 } else { 3 };
                if parts.len() != want {
                    return Err(err(lineno, format!("expected {want} fields")));
                }
                let i: usize = parts[0].parse().map_err(|_| err(lineno, "bad row index".into()))?;
                let j: usize = parts[1].parse().map_err(|_| err(lineno, "bad column index".into()))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(err(lineno, format!("index ({i}, {j}) out of range")));
                }
                let re: f64 = parts[2].parse().map_err(|_| err(lineno, "bad real part".into()))?;
                let im: f64 = if complex {
                    parts[3].parse().map_err(|_| err(lineno, "bad imaginary part".into()))?
                } else {
                    0.0
                };
                let v = Complex64::new(re, im);
                if i >= j {
                    triplets.push((i - 1, j - 1, v));
                } else {
                    triplets.push((j - 1, i - 1, v.conj()));
                }
            }
        }
    }
    let (n, entries) = size.ok_or_else(|| err(1, "missing size line".into()))?;
    if triplets.len() != entries {
        return Err(err(0, format!("expected {entries} entries, found {}", triplets.len())));
    }
    SparseHermitian::from_lower_triplets(n, &triplets).map_err(|e| err(0, e.to_string()))
}
