//! Rate-distortion dimension: twice the slope of `R` against `log2(1/D)`
//! over a low-distortion window of an R(D) curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_line, DimensionEstimate, FitMethod};
use crate::process::ProcessSpec;
use crate::rd::{build_distortion, discretize_source, rd_curve_on_block, BaOptions, RDCurve, RdPoint};

pub const DEFAULT_SAFETY_FACTOR: f64 = 100.0;
/// Consecutive local slopes may differ from the running mean by this
/// fraction of it...
pub const SLOPE_REL_TOL: f64 = 0.10;
/// ...plus this absolute amount, so that flat (zero-slope) stretches count
/// as stable.
pub const SLOPE_ABS_TOL: f64 = 0.01;
/// `D_max` never exceeds this fraction of the zero-rate distortion.
pub const KNEE_FRACTION: f64 = 0.1;
const MIN_CURVE_POINTS: usize = 6;
const MIN_WINDOW_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowRationale {
    Auto,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    #[serde(rename = "D_min")]
    pub d_min: f64,
    #[serde(rename = "D_max")]
    pub d_max: f64,
    pub rationale: WindowRationale,
    pub excluded_points: usize,
}

impl FitWindow {
    pub fn manual(d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_min < d_max) {
            return Err(Error::arg(
                "window",
                format!("need 0 < D_min < D_max, got [{d_min}, {d_max}]"),
            ));
        }
        Ok(Self {
            d_min,
            d_max,
            rationale: WindowRationale::Manual,
            excluded_points: 0,
        })
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.d_min && d <= self.d_max
    }
}

fn log_points(points: &[RdPoint]) -> Vec<(f64, f64, f64)> {
    points
        .iter()
        .filter(|p| p.d > 0.0 && p.d.is_finite())
        .map(|p| (p.d, (1.0 / p.d).log2(), p.r_bits))
        .collect()
}

/// Picks the fit window. `D_min` is `safety_factor · cell_width²` (or the
/// smallest positive `D` of a purely discrete source). Starting there,
/// points are added in increasing `D` while each new local slope stays
/// within [`SLOPE_REL_TOL`] of the running mean slope plus
/// [`SLOPE_ABS_TOL`], and while `D` stays below [`KNEE_FRACTION`] of the
/// curve's zero-rate distortion when that is known.
pub fn select_window(curve: &RDCurve, cell_width: Option<f64>, safety_factor: f64) -> Result<FitWindow> {
    if !(safety_factor > 0.0) {
        return Err(Error::arg("safety_factor", "must be positive"));
    }
    let pts = log_points(&curve.points);
    if pts.len() < MIN_CURVE_POINTS {
        return Err(Error::NoLogSlopeRegime(format!(
            "curve has {} usable points; need at least {MIN_CURVE_POINTS}",
            pts.len()
        )));
    }
    let floor = match cell_width {
        Some(w) => safety_factor * w * w,
        None => pts[0].0,
    };
    let ceiling = curve
        .zero_rate_distortion
        .map_or(f64::INFINITY, |d| KNEE_FRACTION * d);
    let candidates: Vec<&(f64, f64, f64)> = pts.iter().filter(|p| p.0 >= floor && p.0 <= ceiling).collect();
    if candidates.len() < MIN_WINDOW_POINTS {
        return Err(Error::NoLogSlopeRegime(format!(
            "only {} points in [{floor:.3e}, {ceiling:.3e}]",
            candidates.len()
        )));
    }
    let mut kept = 1;
    let mut slope_sum = 0.0;
    for pair in candidates.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dx = a.1 - b.1;
        if !(dx > 0.0) {
            kept += 1;
            continue;
        }
        let slope = (a.2 - b.2) / dx;
        let pairs = (kept - 1) as f64;
        if pairs > 0.0 {
            let mean = slope_sum / pairs;
            if (slope - mean).abs() > SLOPE_REL_TOL * mean.abs() + SLOPE_ABS_TOL {
                break;
            }
        }
        slope_sum += slope;
        kept += 1;
    }
    if kept < MIN_WINDOW_POINTS {
        return Err(Error::NoLogSlopeRegime(format!(
            "local slope unstable above D_min = {floor:.3e}; {kept} point(s) retained"
        )));
    }
    Ok(FitWindow {
        d_min: floor,
        d_max: candidates[kept - 1].0,
        rationale: WindowRationale::Auto,
        excluded_points: curve.points.len() - kept,
    })
}

/// Least-squares slope `β` of `R` on `log2(1/D)` within the window; the
/// estimate is `2β`.
pub fn fit_rdd(curve: &RDCurve, window: &FitWindow) -> Result<DimensionEstimate> {
    let inside: Vec<(f64, f64, f64)> = log_points(&curve.points)
        .into_iter()
        .filter(|p| window.contains(p.0))
        .collect();
    if inside.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} point(s) in [{:.3e}, {:.3e}]; need at least 3",
            inside.len(),
            window.d_min,
            window.d_max
        )));
    }
    let xs: Vec<f64> = inside.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = inside.iter().map(|p| p.2).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(DimensionEstimate::from_line(
        &fit,
        2.0,
        FitMethod::RddFit,
        format!("D in [{:.6e}, {:.6e}]", window.d_min, window.d_max),
    ))
}

/// Which curve the process RDD is read from when `m ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RddCurveKind {
    /// `R^(m)` itself.
    Block,
    /// `m·R^(m) - (m-1)·R^(m-1)`, the rate of the last symbol of a block
    /// given the ones before it.
    #[default]
    Increment,
}

/// `m·R^(m)(D) - (m-1)·R^(m-1)(D)` on the distortions of `upper`, with
/// `lower` interpolated linearly in `log D`. Points outside the sampled
/// range of `lower` are dropped.
pub fn increment_curve(upper: &RDCurve, lower: &RDCurve) -> Result<RDCurve> {
    if upper.m != lower.m + 1 {
        return Err(Error::arg(
            "m",
            format!("need consecutive block lengths, got {} and {}", upper.m, lower.m),
        ));
    }
    let lo_d = lower
        .points
        .iter()
        .map(|p| p.d)
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let hi_d = lower.points.iter().map(|p| p.d).fold(0.0, f64::max);
    let (m, m1) = (upper.m as f64, lower.m as f64);
    let lower_gap = lower.max_gap();
    let points = upper
        .points
        .iter()
        .filter(|p| p.d >= lo_d && p.d <= hi_d)
        .map(|p| {
            let r_lower = lower.rate_at(p.d).unwrap_or(f64::NAN);
            RdPoint {
                r_bits: m * p.r_bits - m1 * r_lower,
                gap: m * p.gap + m1 * lower_gap,
                ..*p
            }
        })
        .collect();
    let mut curve = RDCurve::from_points(points, upper.m, upper.n_cells, upper.source_entropy);
    curve.cell_width = upper.cell_width;
    curve.zero_rate_distortion = upper.zero_rate_distortion;
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RddParams {
    pub m: usize,
    #[serde(rename = "N")]
    pub n_cells: usize,
    pub s_values: Vec<f64>,
    pub ba: BaOptions,
    pub safety_factor: f64,
    #[serde(default)]
    pub curve: RddCurveKind,
    /// Iteration cap for the `R^(m-1)` companion curve; `None` reuses
    /// `ba.max_iter`.
    #[serde(default)]
    pub companion_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    #[serde(rename = "D_min")]
    pub d_min: f64,
    #[serde(rename = "D_max")]
    pub d_max: f64,
}

/// Fit summary in export form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RddReport {
    pub value: f64,
    pub stderr: f64,
    pub window: WindowReport,
    pub points_used: usize,
    pub residual_max: f64,
    pub m: usize,
    #[serde(rename = "N")]
    pub n_cells: usize,
    pub curve: RddCurveKind,
    pub max_gap: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RddOutcome {
    pub estimate: DimensionEstimate,
    pub window: FitWindow,
    /// The curve the fit was taken on.
    pub fitted: RDCurve,
    /// `R^(m)` and, for the increment, `R^(m-1)`.
    pub block_curves: Vec<RDCurve>,
    pub report: RddReport,
}

/// Window selection and fit on a curve, packaged with its report.
pub fn rdd_of_curve(
    curve: RDCurve,
    cell_width: Option<f64>,
    safety_factor: f64,
    kind: RddCurveKind,
) -> Result<RddOutcome> {
    let window = select_window(&curve, cell_width, safety_factor)?;
    let estimate = fit_rdd(&curve, &window)?;
    let max_gap = curve
        .points
        .iter()
        .filter(|p| window.contains(p.d))
        .map(|p| p.gap)
        .fold(0.0, f64::max);
    let unconverged = curve
        .points
        .iter()
        .filter(|p| window.contains(p.d) && !p.converged)
        .count();
    let mut flags = estimate.diagnostics.flags.clone();
    if unconverged > 0 {
        flags.push(format!(
            "{unconverged} window point(s) above the solver tolerance"
        ));
    }
    let report = RddReport {
        value: estimate.value,
        stderr: estimate.stderr,
        window: WindowReport {
            d_min: window.d_min,
            d_max: window.d_max,
        },
        points_used: estimate.diagnostics.points_used,
        residual_max: estimate.diagnostics.residual_max,
        m: curve.m,
        n_cells: curve.n_cells,
        curve: kind,
        max_gap,
        flags,
    };
    Ok(RddOutcome {
        estimate,
        window,
        fitted: curve,
        block_curves: Vec::new(),
        report,
    })
}

/// Traces the block curve(s), selects the window and fits.
pub fn rdd_of_process(spec: &ProcessSpec, params: &RddParams) -> Result<RddOutcome> {
    let block = discretize_source(spec, params.m, params.n_cells)?;
    let table = build_distortion(&block);
    let upper = rd_curve_on_block(&block, &table, &params.s_values, &params.ba, params.n_cells)?;
    let cell_width = block.cell_width;
    let (fitted, mut block_curves) = if params.m >= 2 && params.curve == RddCurveKind::Increment {
        let lower_block = discretize_source(spec, params.m - 1, params.n_cells)?;
        let lower_table = build_distortion(&lower_block);
        let opts = BaOptions {
            max_iter: params.companion_max_iter.unwrap_or(params.ba.max_iter),
            ..params.ba
        };
        let lower = rd_curve_on_block(
            &lower_block,
            &lower_table,
            &params.s_values,
            &opts,
            params.n_cells,
        )?;
        (increment_curve(&upper, &lower)?, vec![upper, lower])
    } else {
        (upper.clone(), vec![upper])
    };
    let kind = if params.m >= 2 {
        params.curve
    } else {
        RddCurveKind::Block
    };
    let mut outcome = rdd_of_curve(fitted, cell_width, params.safety_factor, kind)?;
    outcome.block_curves.append(&mut block_curves);
    Ok(outcome)
}
