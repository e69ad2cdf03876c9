pub mod ctmc;
pub mod entropy;
pub mod ernec;
pub mod error;
pub mod graph;
pub mod hmm;
pub mod io;
pub mod kernel;
pub mod property;
pub mod rng;
pub mod stationary;

pub use error::{NecError, Result};
