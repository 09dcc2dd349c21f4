//! Criterion benchmarks; see `benches/kernels.rs`.
