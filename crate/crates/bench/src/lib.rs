//! Criterion benchmarks for the forest samplers, codings and compositions
//! live in `benches/`.
