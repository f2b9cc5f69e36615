//! Criterion benchmarks for the bGEV kernels and fitters.
