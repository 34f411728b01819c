//! Information dimension from conditional-entropy sweeps.
//!
//! For each memory `k` the conditional entropy `H([X_{k+1}]_b | [X^k]_b)` is
//! regressed on the resolution in bits; the slope estimates `d_k`. The slope
//! rather than the ratio `H/b` is used because the affine offset (the
//! `H(p)`-type term) cancels in the slope but biases the ratio at finite `b`.

use serde::{Deserialize, Serialize};

use crate::entropy::{block_entropy, EntropyRow, Estimator};
use crate::error::{Error, Result};
use crate::fit::{fit_line, DimensionEstimate, FitMethod, OrderEstimate};
use crate::process::{sample_path, ProcessSpec, SamplePath};
use crate::quantizer::{quantize_values, QuantScheme, SchemeKind};
use crate::threads::{par_map, thread_cap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdSweepParams {
    pub k_max: usize,
    pub b_grid: Vec<u32>,
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeKind,
    #[serde(default)]
    pub estimator: Estimator,
}

fn default_scheme() -> SchemeKind {
    SchemeKind::Bbit
}

impl IdSweepParams {
    pub fn new(k_max: usize, b_grid: Vec<u32>, n: usize, seed: u64) -> Self {
        Self {
            k_max,
            b_grid,
            n,
            seed,
            scheme: SchemeKind::Bbit,
            estimator: Estimator::Plugin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdRow {
    pub k: usize,
    pub b: u32,
    pub h_cond: f64,
    pub support_seen: usize,
    pub total: u64,
    /// The `k+1` block counts tripped the undersampling gate.
    pub undersampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IDSweep {
    pub rows: Vec<IdRow>,
    pub spec: ProcessSpec,
    pub n: usize,
    pub seed: u64,
    pub scheme: SchemeKind,
    pub estimator: Estimator,
}

impl IDSweep {
    pub fn k_max(&self) -> usize {
        self.rows.iter().map(|r| r.k).max().unwrap_or(0)
    }

    pub fn rows_for(&self, k: usize) -> impl Iterator<Item = &IdRow> {
        self.rows.iter().filter(move |r| r.k == k)
    }

    pub fn entropy_rows(&self) -> Vec<EntropyRow> {
        self.rows
            .iter()
            .map(|r| EntropyRow {
                k: r.k,
                b: r.b,
                scheme: self.scheme,
                h_conditional_bits: r.h_cond,
                support_seen: r.support_seen,
                total: r.total,
                estimator: self.estimator,
            })
            .collect()
    }

    pub fn flagged_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.undersampled).count()
    }
}

/// Samples one path and evaluates the conditional entropy on every `(k, b)`.
pub fn id_sweep(spec: &ProcessSpec, params: &IdSweepParams) -> Result<IDSweep> {
    let path = sample_path(spec, params.n, params.seed)?;
    id_sweep_on_path(&path, params)
}

pub fn id_sweep_on_path(path: &SamplePath, params: &IdSweepParams) -> Result<IDSweep> {
    if params.b_grid.is_empty() {
        return Err(Error::arg("b_grid", "resolution grid is empty"));
    }
    if path.len() < params.k_max + 1 {
        return Err(Error::BlockTooLong {
            k: params.k_max + 1,
            n: path.len(),
        });
    }
    let per_b = par_map(&params.b_grid, thread_cap(), |&b| {
        rows_at_resolution(path, params, b)
    });
    let mut rows = Vec::with_capacity(params.b_grid.len() * (params.k_max + 1));
    for r in per_b {
        rows.extend(r?);
    }
    rows.sort_by_key(|r| (r.k, r.b));
    Ok(IDSweep {
        rows,
        spec: path.spec.clone(),
        n: path.len(),
        seed: path.seed,
        scheme: params.scheme,
        estimator: params.estimator,
    })
}

fn rows_at_resolution(path: &SamplePath, params: &IdSweepParams, b: u32) -> Result<Vec<IdRow>> {
    let scheme = QuantScheme {
        scheme: params.scheme,
        b,
    };
    let codes = quantize_values(&path.values, scheme)?;
    // Block entropies H_1..H_{k_max+1}; conditional entropies are the
    // successive differences, so the chain rule holds by construction.
    let mut rows = Vec::with_capacity(params.k_max + 1);
    let mut prev = 0.0;
    for k in 0..=params.k_max {
        let (joint, counts) = block_entropy(&codes, k + 1, params.estimator)?;
        let row = IdRow {
            k,
            b,
            h_cond: joint.value - prev,
            support_seen: joint.support_seen,
            total: joint.total,
            undersampled: counts.is_undersampled(),
        };
        if row.undersampled {
            log::warn!(
                "undersampled block counts at k={k}, b={b}: {} distinct of {}",
                row.support_seen,
                row.total
            );
        }
        rows.push(row);
        prev = joint.value;
    }
    Ok(rows)
}

/// Slope of `H_cond` against resolution bits for memory `k`.
pub fn fit_dk(sweep: &IDSweep, k: usize) -> Result<DimensionEstimate> {
    let rows: Vec<&IdRow> = sweep.rows_for(k).collect();
    if rows.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "k={k} has {} resolution(s); need at least 3",
            rows.len()
        )));
    }
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| {
            QuantScheme {
                scheme: sweep.scheme,
                b: r.b,
            }
            .resolution_bits()
        })
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.h_cond).collect();
    let fit = fit_line(&xs, &ys)?;
    let b_lo = rows.iter().map(|r| r.b).min().unwrap_or(0);
    let b_hi = rows.iter().map(|r| r.b).max().unwrap_or(0);
    let mut est = DimensionEstimate::from_line(
        &fit,
        1.0,
        FitMethod::SlopeFit,
        format!("k={k}, {} b={b_lo}..{b_hi}", sweep.scheme),
    );
    let flagged = rows.iter().filter(|r| r.undersampled).count();
    if flagged > 0 {
        est.diagnostics
            .flags
            .push(format!("{flagged} undersampled row(s)"));
    }
    Ok(est)
}

/// Reports `d_{k_max}` with the whole `d_0..d_{k_max}` sequence attached and
/// a flag when it fails to be nonincreasing within two standard errors.
pub fn fit_do(sweep: &IDSweep) -> Result<DimensionEstimate> {
    let k_max = sweep.k_max();
    let per_k: Vec<DimensionEstimate> = (0..=k_max).map(|k| fit_dk(sweep, k)).collect::<Result<_>>()?;
    let mut est = per_k[k_max].clone();
    est.diagnostics.per_order = per_k
        .iter()
        .enumerate()
        .map(|(k, e)| OrderEstimate {
            k,
            value: e.value,
            stderr: e.stderr,
        })
        .collect();
    for (k, pair) in per_k.windows(2).enumerate() {
        let noise = 2.0 * pair[0].stderr.hypot(pair[1].stderr);
        if pair[1].value > pair[0].value + noise + 1e-9 {
            est.diagnostics.flags.push(format!(
                "non-monotone: d_{} = {:.4} exceeds d_{k} = {:.4}",
                k + 1,
                pair[1].value,
                pair[0].value
            ));
        }
    }
    for e in &per_k[..k_max] {
        for f in &e.diagnostics.flags {
            if !est.diagnostics.flags.contains(f) {
                est.diagnostics.flags.push(f.clone());
            }
        }
    }
    est.window = format!("k_max={k_max}; {}", est.window);
    Ok(est)
}
