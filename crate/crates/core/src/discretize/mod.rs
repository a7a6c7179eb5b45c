//! Peierls-phase finite differences for `H_p` on a planar torus or
//! Dirichlet rectangle.

pub mod assemble;
pub mod gauge;
pub mod mm;
pub mod quad;
pub mod sparse;

pub use assemble::{assemble, build_operator, Operator};
pub use gauge::{build_gauge, GaugeData};
pub use mm::{read_matrix, write_matrix};
pub use sparse::SparseHermitian;
