//! Criterion benchmarks for the spectral and solver kernels live under `benches/`.
