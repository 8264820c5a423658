//! Criterion benchmarks for the simulator, estimator and integrator live in
//! `benches/`. Run with `cargo bench -p linksat-bench`.
