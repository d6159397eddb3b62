//! Discrete Dirichlet-to-Neumann operators for differential forms on
//! simplicial manifolds with boundary.

pub mod algebra;
pub mod cylinder;
pub mod dense;
pub mod dtn;
pub mod error;
pub mod exact;
pub mod galerkin;
pub mod generators;
pub mod io;
pub mod mesh;
pub mod report;
pub mod sparse;
pub mod topology;

pub use error::{Error, Result};
