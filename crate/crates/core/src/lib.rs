//! Strong H-infinity norms of delay differential-algebraic systems and
//! fixed-structure controller synthesis.

pub mod asymptotic;
pub mod bench;
pub mod catalog;
pub mod cli;
pub mod discretize;
pub mod error;
pub mod interconnect;
pub mod io;
pub mod levelset;
pub mod linalg;
pub mod model;
pub mod peak;
pub mod synthesis;

pub use error::{Error, Result};
