//! Criterion benchmarks for `cop-lqr`; see `benches/solver.rs`.
