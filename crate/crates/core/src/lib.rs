//! Normal approximation of subgraph counts in `G(n, p)` by the
//! Stein–Tikhomirov method.

pub mod bkr;
pub mod bounds;
pub mod copies;
pub mod error;
pub mod exact;
pub mod mc;
pub mod model;
pub mod numeric;
pub mod pattern;
pub mod rng;
pub mod stein;

pub use error::{Error, Result};
