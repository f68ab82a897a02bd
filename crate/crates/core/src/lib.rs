pub mod error;
pub mod evolution;
pub mod graphs;
pub mod harness;
pub mod hamiltonians;
pub mod optimize;
pub mod permutations;
pub mod qaoa;
pub mod rng;

pub use error::{Error, Result};
