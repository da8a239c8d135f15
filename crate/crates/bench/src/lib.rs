//! Criterion benchmarks for the beamforming toolkit live in `benches/`.
