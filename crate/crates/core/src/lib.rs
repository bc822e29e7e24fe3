//! Regular partitions of the boolean hypercube and the hat-guessing games
//! they solve.

pub mod constructions;
mod cover;
pub mod error;
pub mod game;
pub mod hypercube;
pub mod search;

pub use error::{Error, Result};
