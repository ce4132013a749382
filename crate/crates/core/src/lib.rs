//! Matrix-completion state estimation for low-observable distribution
//! feeders: network models, measurement scenarios, the conic estimation
//! models, the eigenvector-disjunction branch and bound, and the benchmark
//! harness.

pub mod bench;
pub mod bnb;
pub mod error;
pub mod measgen;
pub mod models;
pub mod netmodel;
pub mod scenario;

pub use error::{CoreError, Result};
