//! Certified asymptotic key rates for the modified coherent-one-way QKD
//! protocol: receiver model, universal squashing bounds and a phase-error
//! semidefinite program, with a brute-force Fock-space oracle.

pub mod error;
pub mod fock;
pub mod linalg;
pub mod receiver;
pub mod scan;
pub mod sdp;
pub mod security;
pub mod squashing;

pub use error::{Error, Result};
pub use receiver::{expected_statistics, Basis, Outcome, ProtocolConfig, StatTable, Variant};
pub use squashing::{squash_bounds, SquashedBounds};
pub use scan::{fit_scaling, scan, ScanRow, ScanSpec};
