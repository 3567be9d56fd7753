//! Multi-range oriented percolation on the trees `T_{d,k}`.
//!
//! Every vertex of `T_{d,k}` has `d` short edges to its children and `d^k`
//! long edges to its descendants `k` levels down; short edges are open with
//! probability `p`, long edges with probability `q`. The crate computes the
//! critical curve `q_c(p)` from the Perron root of an exact multi-type
//! branching process on windows, and provides the Monte Carlo explorations,
//! branching-process transformations and slab couplings used to check it.

pub mod coupling;
pub mod critical;
pub mod error;
pub mod mtbp;
pub mod oracle;
pub mod percolation;
pub mod spectral;
pub mod stats;
pub mod tree;
pub mod window;

pub use critical::{asymptotics_table, qc, qc_sweep, rho, AsymptoticsRow, CurvePoint, RhoSolver};
pub use error::{Error, Result};
pub use oracle::EdgeOracle;
pub use percolation::PercParams;
pub use tree::{TreeParams, VertexPath, Window};
