//! Binary Galton–Watson forests with exponential branch lengths: sampling,
//! composition and splitting, walk decompositions, exact laws and the
//! statistical suites that check them against each other.

pub mod compose;
pub mod decompose;
pub mod exact;
pub mod forest;
pub mod samplers;
pub mod stats;
