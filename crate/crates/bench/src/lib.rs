//! Fixtures shared by the benchmarks.

use dimlab_core::{
    build_distortion, discretize_source, quantize_values, sample_path, ContinuousSpec, DiscretizedBlock,
    DistortionTable, ProcessSpec, QuantScheme,
};

pub const SEED: u64 = 0x5eed;

pub fn markov_source() -> ProcessSpec {
    ProcessSpec::piecewise_constant(0.2, ContinuousSpec::uniform(0.0, 1.0))
}

/// A discretized block and its distortion table.
pub fn solver_problem(m: usize, n_cells: usize) -> (DiscretizedBlock, DistortionTable) {
    let block = discretize_source(&markov_source(), m, n_cells).expect("tractable fixture");
    let table = build_distortion(&block);
    (block, table)
}

/// Codes of a Markov path at `b` bits.
pub fn quantized_codes(n: usize, b: u32) -> Vec<i64> {
    let path = sample_path(&markov_source(), n, SEED).expect("valid fixture");
    quantize_values(&path.values, QuantScheme::bbit(b)).expect("in range")
}
