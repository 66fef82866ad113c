//! Path decompositions: splitting a walk at its minimum, ladder excursions,
//! inserting and extracting excursions on a coarser walk, and the
//! alternating lower envelope of a path relative to a set of marked peaks.

mod envelope;
mod excursions;
mod insert;
mod williams;

pub use envelope::{
    alternating_envelope, brownian_envelope, red_innovation_walk, Breakpoint, EnvelopeDecomposition,
};
pub use excursions::{extract_excursions, reverse_walk, ExcursionRecord};
pub use insert::{extract_insertions, insert_excursions, InsertedWalk, LocatedExcursion};
pub use williams::{
    brownian_williams_split, mark_and_split, sample_geometric, split_at_marks, williams_split,
    MarkedSplit, Stretch, WilliamsSplit,
};

use thiserror::Error;

use crate::forest::ForestError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("walk has {have} pairs, {needed} needed")]
    NotEnoughPairs { needed: usize, have: usize },
    #[error("split size must be at least 1")]
    ZeroSplit,
    #[error("tied minimum at vertex {index}")]
    Tie { index: usize },
    #[error("{0}")]
    OutOfRange(String),
    #[error("probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("{0}")]
    BadMarks(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
}
