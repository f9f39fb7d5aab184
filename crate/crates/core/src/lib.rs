//! Back-translation synthetic data analysis: quality and importance
//! diagnostics, Gamma-score candidate selection, beam/sampling data
//! manipulation, and a desk-scale toy translation task to run it all on.

pub mod analysis;
pub mod btloop;
pub mod corpus;
pub mod error;
pub mod manipulate;
pub mod rng;
pub mod scoring;
pub mod toyseq;

pub use error::{Error, Result};

/// Integer token id.
pub type Token = u32;
