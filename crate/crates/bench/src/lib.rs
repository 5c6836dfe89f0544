//! Criterion benchmarks for spinlab kernels; see `benches/kernels.rs`.
