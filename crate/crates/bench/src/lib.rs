//! Criterion benchmarks for `balance-core` live in `benches/`.
