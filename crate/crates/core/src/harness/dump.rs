//! Binary grid dumps.
//!
//! Layout, all little-endian: `u64 n2`, `u64 n1`, then `n1 * n2` `f64`
//! values with the first axis fastest (row-major over `[n2][n1]`), which is
//! the node order of [`Grid`](crate::model::Grid).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_grid_dump(path: &Path, shape: [usize; 2], values: &[f64]) -> Result<()> {
    let [n1, n2] = shape;
    if n1 * n2 != values.len() {
        return Err(Error::InvalidInput(format!(
            "grid dump of shape {n1}x{n2} given {} values",
            values.len()
        )));
    }
    let mut bytes = Vec::with_capacity(16 + 8 * values.len());
    bytes.extend_from_slice(&(n2 as u64).to_le_bytes());
    bytes.extend_from_slice(&(n1 as u64).to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Returns `([n1, n2], values)`.
pub fn read_grid_dump(path: &Path) -> Result<([usize; 2], Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    if bytes.len() < 16 {
        return Err(Error::InvalidInput(format!(
            "{} is too short for a grid dump",
            path.display()
        )));
    }
    let n2 = u64::from_le_bytes(word(0)) as usize;
    let n1 = u64::from_le_bytes(word(1)) as usize;
    let count = n1
        .checked_mul(n2)
        .filter(|&c| bytes.len() == 16 + 8 * c)
        .ok_or_else(|| Error::InvalidInput(format!("{}: size does not match header {n2}x{n1}", path.display())))?;
    let values = (0..count).map(|i| f64::from_le_bytes(word(2 + i))).collect();
    Ok(([n1, n2], values))
}
