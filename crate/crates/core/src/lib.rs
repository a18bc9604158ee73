//! Fluctuation theory of one-dimensional random walks and Markov chains
//! killed on leaving the positive half-line.

pub mod chain;
pub mod error;
pub mod exactdp;
pub mod harmonic;
pub mod numeric;
pub mod oracles;
pub mod rng;
pub mod stats;
pub mod steplaw;
pub mod universal;
pub mod verify;
pub mod wienerhopf;

pub use error::{Error, Result};
pub use steplaw::{Pmf, StepLaw};
