pub mod cavity;
pub mod crib;
pub mod error;
pub mod free_space;
pub mod numerics;
pub mod optimizer;
pub mod problems;
pub mod profile;
pub mod scenario;
pub mod signal;

pub use error::{Error, Result};
