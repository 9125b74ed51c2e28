//! Benchmark crate; the benchmarks live under `benches/`.
