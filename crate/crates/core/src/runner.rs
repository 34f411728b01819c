//! Executes an [`ExperimentConfig`] and writes its artifacts.
//!
//! Artifacts are named `{task}_{hash}.{csv,json}` where `hash` is the first
//! 12 hex digits of the SHA-256 of the canonical config JSON. Files are
//! written to a temporary sibling and renamed into place.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{ExperimentConfig, Task};
use crate::entropy::write_entropy_csv;
use crate::error::{Error, Result};
use crate::id::{fit_do, id_sweep, IdSweepParams};
use crate::oracles::ToleranceBudget;
use crate::process::{jump_statistics, sample_path, JumpStatistics, ProcessKind};
use crate::rd::{rd_curve, RDCurve};
use crate::rdd::{rdd_of_curve, rdd_of_process, RddCurveKind, RddOutcome, RddParams};
use crate::seed::child_seed;
use crate::verify::{verify_timed, GroupTiming, VerifyOptions, VerifyReport};

/// Child-seed index of the sample path drawn by `simulate` and `id`; shared
/// so both tasks see the same path for the same config seed.
pub const PATH_STREAM: u64 = 0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// One line per estimate, or the error message.
    pub summaries: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    /// Wall times of the verification groups; never written to artifacts.
    pub timings: Vec<GroupTiming>,
}

impl RunOutcome {
    fn failed(err: &Error) -> Self {
        Self {
            exit_code: err.exit_code(),
            summaries: vec![format!("error: {err}")],
            ..Default::default()
        }
    }
}

/// Validates and runs `config`. Errors are folded into the exit code.
pub fn run(config: &ExperimentConfig) -> RunOutcome {
    match config.validate().and_then(|()| dispatch(config)) {
        Ok(out) => out,
        Err(e) => RunOutcome::failed(&e),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    fs::create_dir_all(&cfg.output_dir)?;
    match cfg.task {
        Task::Simulate => run_simulate(cfg),
        Task::Id => run_id(cfg),
        Task::Rd => run_rd(cfg),
        Task::Rdd => run_rdd(cfg),
        Task::Verify => run_verify(cfg),
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, |out| {
        out.write_all(text.as_bytes())?;
        out.write_all(b"\n")
    })
}

struct Artifacts {
    csv: PathBuf,
    json: PathBuf,
}

fn artifacts(cfg: &ExperimentConfig) -> Artifacts {
    let stem = cfg.artifact_stem();
    Artifacts {
        csv: cfg.output_dir.join(format!("{stem}.csv")),
        json: cfg.output_dir.join(format!("{stem}.json")),
    }
}

fn spec_of(cfg: &ExperimentConfig) -> Result<&crate::process::ProcessSpec> {
    cfg.spec
        .as_ref()
        .ok_or_else(|| Error::Config(format!("task `{}` requires `spec`", cfg.task.name())))
}

fn required<T: Copy>(v: Option<T>, cfg: &ExperimentConfig, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("task `{}` requires `{field}`", cfg.task.name())))
}

#[derive(Serialize)]
struct SimulateSummary {
    n: usize,
    seed: u64,
    mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    jumps: Option<JumpStatistics>,
}

fn run_simulate(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let spec = spec_of(cfg)?;
    let n = required(cfg.n, cfg, "n")?;
    let path = sample_path(spec, n, child_seed(cfg.seed, PATH_STREAM))?;
    let jumps = match spec.kind {
        ProcessKind::PiecewiseConstantMarkov | ProcessKind::IidMixture => Some(jump_statistics(&path)?),
        _ => None,
    };
    let summary = SimulateSummary {
        n,
        seed: path.seed,
        mean: path.values.iter().sum::<f64>() / n as f64,
        jumps,
    };
    let a = artifacts(cfg);
    write_atomic(&a.csv, |out| path.write_csv(out))?;
    write_json(&a.json, &summary)?;
    let mut line = format!("simulate: {} samples of {}", n, spec.kind);
    if let Some(j) = jumps {
        line.push_str(&format!(", jump fraction {:.4}", j.fraction));
    }
    Ok(RunOutcome {
        exit_code: EXIT_OK,
        summaries: vec![line],
        artifacts: vec![a.csv, a.json],
        timings: Vec::new(),
    })
}

fn run_id(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let params = IdSweepParams {
        k_max: cfg.k_max,
        b_grid: cfg.b_grid.clone().unwrap_or_default(),
        n: required(cfg.n, cfg, "n")?,
        seed: child_seed(cfg.seed, PATH_STREAM),
        scheme: cfg.scheme,
        estimator: cfg.estimator,
    };
    let sweep = id_sweep(spec_of(cfg)?, &params)?;
    let a = artifacts(cfg);
    write_atomic(&a.csv, |out| write_entropy_csv(&sweep.entropy_rows(), out))?;
    let est = fit_do(&sweep)?;
    write_json(&a.json, &est)?;
    let mut line = format!("id: d_{} = {:.4} ± {:.4}", cfg.k_max, est.value, est.stderr);
    for f in &est.diagnostics.flags {
        line.push_str(&format!(" [{f}]"));
    }
    Ok(RunOutcome {
        exit_code: EXIT_OK,
        summaries: vec![line],
        artifacts: vec![a.csv, a.json],
        timings: Vec::new(),
    })
}

#[derive(Serialize)]
struct RdSummary {
    m: usize,
    #[serde(rename = "N")]
    n_cells: usize,
    points: usize,
    max_gap: f64,
    unconverged: usize,
    source_entropy: f64,
    monotonicity_violations: usize,
    convexity_violations: usize,
}

fn run_rd(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let s_values = required(cfg.s_grid, cfg, "s_grid")?.values();
    let n_cells = required(cfg.n_cells, cfg, "N")?;
    let curve = rd_curve(spec_of(cfg)?, cfg.m, n_cells, &s_values, &cfg.ba_options())?;
    let a = artifacts(cfg);
    write_atomic(&a.csv, |out| curve.write_csv(out))?;
    let summary = RdSummary {
        m: curve.m,
        n_cells: curve.n_cells,
        points: curve.points.len(),
        max_gap: curve.max_gap(),
        unconverged: curve.unconverged(),
        source_entropy: curve.source_entropy,
        monotonicity_violations: curve.monotonicity_violations(1e-6).len(),
        convexity_violations: curve.convexity_violations(1e-6).len(),
    };
    write_json(&a.json, &summary)?;
    let budget = ToleranceBudget::default().solver_bits();
    let mut outcome = RunOutcome {
        exit_code: EXIT_OK,
        summaries: vec![format!(
            "rd: {} points, m={}, N={}, max gap {:.2e} bits",
            summary.points, summary.m, summary.n_cells, summary.max_gap
        )],
        artifacts: vec![a.csv, a.json],
        timings: Vec::new(),
    };
    if summary.max_gap > budget {
        outcome.exit_code = EXIT_NUMERICAL;
        outcome.summaries.push(format!(
            "error: solver gap {:.3e} exceeds the {budget} bit budget",
            summary.max_gap
        ));
    }
    Ok(outcome)
}

fn run_rdd(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let outcome: RddOutcome = if let Some(path) = &cfg.curve_csv {
        let file = fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let curve = RDCurve::read_csv(BufReader::new(file))?;
        let cell_width = curve.cell_width;
        rdd_of_curve(curve, cell_width, cfg.safety_factor, RddCurveKind::Block)?
    } else if let Some(oracle) = &cfg.oracle {
        let curve = oracle.curve.to_rd_curve(&oracle.d_grid.values())?;
        rdd_of_curve(curve, None, cfg.safety_factor, RddCurveKind::Block)?
    } else {
        let params = RddParams {
            m: cfg.m,
            n_cells: required(cfg.n_cells, cfg, "N")?,
            s_values: required(cfg.s_grid, cfg, "s_grid")?.values(),
            ba: cfg.ba_options(),
            safety_factor: cfg.safety_factor,
            curve: cfg.rdd_curve,
            companion_max_iter: None,
        };
        rdd_of_process(spec_of(cfg)?, &params)?
    };
    let a = artifacts(cfg);
    write_atomic(&a.csv, |out| outcome.fitted.write_csv(out))?;
    write_json(&a.json, &outcome.report)?;
    let r = &outcome.report;
    let mut result = RunOutcome {
        exit_code: EXIT_OK,
        summaries: vec![format!(
            "rdd: {:.4} ± {:.4} over D in [{:.3e}, {:.3e}] ({} points)",
            r.value, r.stderr, r.window.d_min, r.window.d_max, r.points_used
        )],
        artifacts: vec![a.csv, a.json],
        timings: Vec::new(),
    };
    let budget = ToleranceBudget::default().solver_bits();
    if r.max_gap > budget {
        result.exit_code = EXIT_NUMERICAL;
        result.summaries.push(format!(
            "error: solver gap {:.3e} in the window exceeds the {budget} bit budget",
            r.max_gap
        ));
    }
    Ok(result)
}

/// CSV of verification cases.
pub fn write_verify_csv<W: Write + ?Sized>(report: &VerifyReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "name,expected,estimated,tolerance,check,pass")?;
    for c in &report.cases {
        let est = c.estimated.map(|v| v.to_string()).unwrap_or_default();
        let check = serde_json::to_value(c.check)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.name, c.expected, est, c.tolerance, check, c.pass
        )?;
    }
    Ok(())
}

fn short(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.1e}")
    } else {
        format!("{}", (x * 1e6).round() / 1e6)
    }
}

fn run_verify(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let (report, timings) = verify_timed(&VerifyOptions::new(cfg.seed, cfg.quick));
    let a = artifacts(cfg);
    write_atomic(&a.csv, |out| write_verify_csv(&report, out))?;
    write_json(&a.json, &report)?;
    let mut summaries: Vec<String> = report
        .cases
        .iter()
        .map(|c| {
            let est = c.estimated.map_or("n/a".to_string(), short);
            format!(
                "{} {}: estimated {est}, expected {} ({:?}, tol {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                short(c.expected),
                c.check,
                short(c.tolerance)
            )
        })
        .collect();
    let passed = report.cases.iter().filter(|c| c.pass).count();
    summaries.push(format!(
        "verify: {passed}/{} cases pass, overall {}",
        report.cases.len(),
        if report.overall { "PASS" } else { "FAIL" }
    ));
    Ok(RunOutcome {
        exit_code: if report.overall { EXIT_OK } else { EXIT_NUMERICAL },
        summaries,
        artifacts: vec![a.csv, a.json],
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_atomic(&path, |o| o.write_all(b"one")).unwrap();
        write_atomic(&path, |o| o.write_all(b"two")).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn invalid_config_exits_one() {
        let cfg = ExperimentConfig::new(Task::Id);
        let out = run(&cfg);
        assert_eq!(out.exit_code, EXIT_INVALID);
        assert!(out.summaries[0].contains("spec"), "{:?}", out.summaries);
    }
}
