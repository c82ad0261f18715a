//! Criterion benchmarks for modsum live under `benches/`.
