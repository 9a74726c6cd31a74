//! Benchmarks for the flow, segmentation, eigenspace and matching stages
//! live under `benches/`; this crate has no library code.
