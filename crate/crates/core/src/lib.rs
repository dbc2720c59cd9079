#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod minimax;
pub mod mp;
pub mod quad;
pub mod rng;
pub mod solver;
pub mod svt;

pub use error::{Error, Result};
