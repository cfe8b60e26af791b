//! Criterion benchmarks for `langevin-kit`; see `benches/kernels.rs`.
