//! Benchmark-only crate: see `benches/kernels.rs`. No library code.
