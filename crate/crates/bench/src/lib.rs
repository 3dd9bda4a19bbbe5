//! Benchmark-only crate. See `benches/hotpaths.rs`.
