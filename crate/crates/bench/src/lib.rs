//! Criterion benchmarks for the pointing pipeline; see `benches/pipeline.rs`.
//!
//! Run with `cargo bench -p pointing-bench`.
