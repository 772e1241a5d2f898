//! Criterion benchmarks for the `nbmc` crate live in `benches/`.
