//! Benchmarks for bct-core; see `benches/`.
