//! Criterion benchmarks for the selection hot paths live under `benches/`.
