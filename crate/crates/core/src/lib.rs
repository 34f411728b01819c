//! Information-dimension and rate-distortion-dimension estimation for
//! analog stationary processes.
//!
//! The pipeline runs from a [`ProcessSpec`] through sampling and
//! quantization to conditional-entropy sweeps ([`id_sweep`], [`fit_do`]),
//! and separately through discretization and Blahut–Arimoto
//! ([`rd_curve`]) to a rate-distortion dimension fit ([`rdd_of_process`]).

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod entropy;
pub mod error;
pub mod fit;
pub mod id;
pub mod oracles;
pub mod process;
pub mod quantizer;
pub mod rd;
pub mod rdd;
pub mod runner;
pub mod seed;
pub mod threads;
pub mod verify;

pub use config::{DGrid, ExperimentConfig, OracleInput, Task};
pub use entropy::{
    block_entropy, conditional_entropy, conditional_entropy_of_codes, count_blocks, count_code_blocks,
    entropy_plugin, miller_madow_correct, Block, BlockCounts, EntropyEstimate, EntropyRow, Estimator,
};
pub use error::{Error, Result};
pub use fit::{fit_line, DimensionEstimate, FitDiagnostics, FitMethod, LineFit, OrderEstimate};
pub use id::{fit_dk, fit_do, id_sweep, id_sweep_on_path, IDSweep, IdRow, IdSweepParams};
pub use oracles::{
    binary_entropy, binary_hamming_rd, gaussian_rd, mixture_bounds, uniform_slb, uniform_slb_width,
    OracleCurve, OracleKind, RateCurve, ToleranceBudget,
};
pub use process::{
    jump_statistics, sample_path, validate_spec, ContinuousFamily, ContinuousSpec, JumpStatistics,
    ProcessKind, ProcessSpec, SamplePath, ValidationReport,
};
pub use quantizer::{
    check_quantizer_invariants, quantize_path, quantize_scalar, quantize_values, QuantScheme, QuantizedPath,
    QuantizerAudit, SchemeKind,
};
pub use rd::{
    blahut_arimoto, build_distortion, discretize_source, rd_curve, rd_curve_on_block, BaOptions, BaSolution,
    DiscretizedBlock, DistortionTable, RDCurve, RdPoint, SGrid,
};
pub use rdd::{
    fit_rdd, increment_curve, rdd_of_curve, rdd_of_process, select_window, FitWindow, RddCurveKind,
    RddOutcome, RddParams, RddReport,
};
pub use runner::{run, RunOutcome};
pub use seed::{child_seed, rng_from_seed};
pub use verify::{verify, verify_timed, Check, VerifyCase, VerifyOptions, VerifyReport};
