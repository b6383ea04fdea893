//! Space-time max-stable random fields on regular grids: closed-form pairwise
//! dependence, simulation, F-madogram estimation, weighted least-squares
//! fitting, marginal transformation and permutation-based independence bands.

pub mod error;
pub mod field;
pub mod fit;
pub mod lattice;
pub mod madogram;
pub mod margins;
pub mod models;
pub mod optim;
pub mod permtest;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use field::{Margins, SpaceTimeField};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
