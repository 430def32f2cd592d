//! Exchangeable Markov processes on k-colorings of the natural numbers.
//!
//! The crate simulates mean-field particle systems and their infinite
//! exchangeable limits, projects ensembles onto the probability simplex, and
//! builds the minimal compatible semigroup of stochastic matrices that covers
//! a cadlag path of bounded variation.

pub mod discrete;
pub mod ensemble;
pub mod error;
pub mod fixtures;
mod integrate;
pub mod meanfield;
pub mod path;
pub mod projection;
pub mod rng;
pub mod semigroup;
pub mod simplex;
pub mod suite;

pub use ensemble::{EnsemblePath, FlipEvent};
pub use error::{Error, Result};
pub use path::{path_total_variation, Interp, Piece, Segment, SimplexPath};
pub use simplex::{
    l1_distance, matrix_exp, tv_distance, GeneratorMatrix, SimplexPoint, StochasticMatrix,
};
