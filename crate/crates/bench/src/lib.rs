//! Benchmarks for the estimators and the output matcher. See `benches/`.
