//! Source models and reproducible sample paths.
//!
//! Four families are supported: i.i.d. mixtures `(1-p)·δ_atom + p·f_c`,
//! i.i.d. draws from a bounded continuous density `f_c`, i.i.d. draws from a
//! finite pmf, and the first-order piecewise-constant Markov process that
//! keeps its previous value with probability `1-p` and redraws from `f_c`
//! with probability `p`.

use std::fmt;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Largest tolerated deviation of `∫ f_c` from one.
pub const DENSITY_NORMALIZATION_TOL: f64 = 1e-9;
/// Largest tolerated deviation of a pmf's total mass from one.
pub const PMF_NORMALIZATION_TOL: f64 = 1e-12;
/// Truncated Gaussians whose support holds less mass than this are refused:
/// the rejection sampler would spin.
const MIN_REJECTION_ACCEPTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousFamily {
    Uniform,
    /// `params = [mean, stddev]`, truncated to the support.
    TruncatedGaussian,
}

/// A continuous density on a bounded interval `(support_low, support_high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSpec {
    pub family: ContinuousFamily,
    pub support_low: f64,
    pub support_high: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

impl ContinuousSpec {
    pub fn uniform(low: f64, high: f64) -> Self {
        Self {
            family: ContinuousFamily::Uniform,
            support_low: low,
            support_high: high,
            params: Vec::new(),
        }
    }

    pub fn truncated_gaussian(mean: f64, stddev: f64, low: f64, high: f64) -> Self {
        Self {
            family: ContinuousFamily::TruncatedGaussian,
            support_low: low,
            support_high: high,
            params: vec![mean, stddev],
        }
    }

    pub fn width(&self) -> f64 {
        self.support_high - self.support_low
    }

    fn gaussian_params(&self) -> (f64, f64) {
        (
            self.params.first().copied().unwrap_or(f64::NAN),
            self.params.get(1).copied().unwrap_or(f64::NAN),
        )
    }

    /// Mass of the untruncated Gaussian inside the support.
    fn gaussian_normalizer(&self) -> f64 {
        let (mu, sd) = self.gaussian_params();
        std_normal_cdf((self.support_high - mu) / sd) - std_normal_cdf((self.support_low - mu) / sd)
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(x > self.support_low && x < self.support_high) {
            return 0.0;
        }
        match self.family {
            ContinuousFamily::Uniform => 1.0 / self.width(),
            ContinuousFamily::TruncatedGaussian => {
                let (mu, sd) = self.gaussian_params();
                let z = (x - mu) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt() * self.gaussian_normalizer())
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.support_low {
            return 0.0;
        }
        if x >= self.support_high {
            return 1.0;
        }
        match self.family {
            ContinuousFamily::Uniform => (x - self.support_low) / self.width(),
            ContinuousFamily::TruncatedGaussian => {
                let (mu, sd) = self.gaussian_params();
                let lo = std_normal_cdf((self.support_low - mu) / sd);
                (std_normal_cdf((x - mu) / sd) - lo) / self.gaussian_normalizer()
            }
        }
    }

    /// Probability of the interval `[a, b]`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    pub fn variance(&self) -> f64 {
        match self.family {
            ContinuousFamily::Uniform => self.width() * self.width() / 12.0,
            ContinuousFamily::TruncatedGaussian => {
                let (mu, sd) = self.gaussian_params();
                let a = (self.support_low - mu) / sd;
                let b = (self.support_high - mu) / sd;
                let z = self.gaussian_normalizer();
                let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
                let t1 = (a * pa - b * pb) / z;
                let t2 = (pa - pb) / z;
                sd * sd * (1.0 + t1 - t2 * t2)
            }
        }
    }

    /// Differential entropy in bits.
    pub fn differential_entropy_bits(&self) -> f64 {
        match self.family {
            ContinuousFamily::Uniform => self.width().log2(),
            ContinuousFamily::TruncatedGaussian => {
                let f = |x: f64| {
                    let d = self.density(x);
                    if d > 0.0 {
                        -d * d.log2()
                    } else {
                        0.0
                    }
                };
                adaptive_simpson(&f, self.support_low, self.support_high, 1e-12, 40)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            ContinuousFamily::Uniform => {
                // Inverse CDF; u in [0,1), kept off the closed lower endpoint.
                loop {
                    let u: f64 = rng.random();
                    let x = self.support_low + u * self.width();
                    if x > self.support_low && x < self.support_high {
                        return x;
                    }
                }
            }
            ContinuousFamily::TruncatedGaussian => {
                let (mu, sd) = self.gaussian_params();
                let normal = Normal::new(mu, sd).expect("validated stddev");
                loop {
                    let x = normal.sample(rng);
                    if x > self.support_low && x < self.support_high {
                        return x;
                    }
                }
            }
        }
    }

    fn check(&self, field: &str, report: &mut ValidationReport) {
        let (l, u) = (self.support_low, self.support_high);
        if !(l.is_finite() && u.is_finite()) {
            report.push(format!("{field}.support"), "support bounds must be finite");
            return;
        }
        if l >= u {
            report.push(
                format!("{field}.support"),
                format!("support_low {l} must be below support_high {u}"),
            );
            return;
        }
        match self.family {
            ContinuousFamily::Uniform => {}
            ContinuousFamily::TruncatedGaussian => {
                let (mu, sd) = self.gaussian_params();
                if self.params.len() != 2 || !mu.is_finite() || !(sd > 0.0 && sd.is_finite()) {
                    report.push(
                        format!("{field}.params"),
                        "truncated_gaussian needs params [mean, stddev > 0]",
                    );
                    return;
                }
                if self.gaussian_normalizer() < MIN_REJECTION_ACCEPTANCE {
                    report.push(
                        format!("{field}.params"),
                        "support holds too little Gaussian mass for rejection sampling",
                    );
                    return;
                }
            }
        }
        let total = adaptive_simpson(&|x| self.density(x), l, u, 1e-13, 50);
        if (total - 1.0).abs() > DENSITY_NORMALIZATION_TOL {
            report.push(
                format!("{field}.density"),
                format!("density integrates to {total}, not 1"),
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    IidMixture,
    IidContinuous,
    IidDiscrete,
    PiecewiseConstantMarkov,
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessKind::IidMixture => "iid_mixture",
            ProcessKind::IidContinuous => "iid_continuous",
            ProcessKind::IidDiscrete => "iid_discrete",
            ProcessKind::PiecewiseConstantMarkov => "piecewise_constant_markov",
        })
    }
}

fn default_p() -> f64 {
    1.0
}

/// Parametric description of a source.
///
/// `p` is the continuous-mass weight for `iid_mixture` and the jump
/// probability for `piecewise_constant_markov`; other kinds ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discrete_pmf: Vec<(f64, f64)>,
    #[serde(default)]
    pub atom: f64,
}

impl ProcessSpec {
    pub fn iid_mixture(p: f64, continuous: ContinuousSpec) -> Self {
        Self {
            kind: ProcessKind::IidMixture,
            p,
            continuous: Some(continuous),
            discrete_pmf: Vec::new(),
            atom: 0.0,
        }
    }

    pub fn iid_continuous(continuous: ContinuousSpec) -> Self {
        Self {
            kind: ProcessKind::IidContinuous,
            p: 1.0,
            continuous: Some(continuous),
            discrete_pmf: Vec::new(),
            atom: 0.0,
        }
    }

    pub fn iid_discrete(pmf: Vec<(f64, f64)>) -> Self {
        Self {
            kind: ProcessKind::IidDiscrete,
            p: 1.0,
            continuous: None,
            discrete_pmf: pmf,
            atom: 0.0,
        }
    }

    pub fn piecewise_constant(p: f64, continuous: ContinuousSpec) -> Self {
        Self {
            kind: ProcessKind::PiecewiseConstantMarkov,
            p,
            continuous: Some(continuous),
            discrete_pmf: Vec::new(),
            atom: 0.0,
        }
    }

    pub fn with_atom(mut self, atom: f64) -> Self {
        self.atom = atom;
        self
    }

    pub fn is_memoryless(&self) -> bool {
        self.kind != ProcessKind::PiecewiseConstantMarkov
    }

    /// Closed interval guaranteed to contain every sample.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self.kind {
            ProcessKind::IidDiscrete => {
                for &(v, _) in &self.discrete_pmf {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            ProcessKind::IidMixture => {
                lo = self.atom;
                hi = self.atom;
            }
            _ => {}
        }
        if let Some(c) = &self.continuous {
            if self.kind != ProcessKind::IidDiscrete {
                lo = lo.min(c.support_low);
                hi = hi.max(c.support_high);
            }
        }
        (lo, hi)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_spec(self)
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(report))
        }
    }

    pub(crate) fn continuous_part(&self) -> Result<&ContinuousSpec> {
        self.continuous
            .as_ref()
            .ok_or_else(|| Error::Unsupported(format!("{} spec without continuous part", self.kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Outcome of [`validate_spec`]; empty means the spec is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.message.contains(needle) || v.field.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_spec(spec: &ProcessSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(0.0..=1.0).contains(&spec.p) {
        report.push("p", format!("p out of [0,1]: {}", spec.p));
    }
    if !spec.atom.is_finite() {
        report.push("atom", "atom must be finite");
    }
    match spec.kind {
        ProcessKind::IidDiscrete => {
            if spec.discrete_pmf.is_empty() {
                report.push("discrete_pmf", "iid_discrete needs a non-empty pmf");
            }
            let mut total = 0.0;
            for (i, &(v, q)) in spec.discrete_pmf.iter().enumerate() {
                if !v.is_finite() {
                    report.push(format!("discrete_pmf[{i}]"), "atom value must be finite");
                }
                if !(0.0..=1.0).contains(&q) {
                    report.push(
                        format!("discrete_pmf[{i}]"),
                        format!("probability {q} out of [0,1]"),
                    );
                }
                total += q;
            }
            if !spec.discrete_pmf.is_empty() && (total - 1.0).abs() > PMF_NORMALIZATION_TOL {
                report.push("discrete_pmf", format!("pmf sums to {}", round_sig(total)));
            }
            let mut values: Vec<f64> = spec.discrete_pmf.iter().map(|&(v, _)| v).collect();
            values.sort_by(f64::total_cmp);
            if values.windows(2).any(|w| w[0] == w[1]) {
                report.push("discrete_pmf", "atom values must be distinct");
            }
        }
        kind => match &spec.continuous {
            Some(c) => c.check("continuous", &mut report),
            None => report.push("continuous", format!("{kind} needs a continuous component")),
        },
    }
    report
}

/// A finite realization of a process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub spec: ProcessSpec,
    pub seed: u64,
    /// Bernoulli jump draws of the Markov kind; entry 0 is always `false`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_indicators: Option<Vec<bool>>,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV with columns `index,value[,jump]`, 1-based index.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        match &self.jump_indicators {
            Some(jumps) => {
                writeln!(out, "index,value,jump")?;
                for (i, (v, j)) in self.values.iter().zip(jumps).enumerate() {
                    writeln!(out, "{},{},{}", i + 1, v, u8::from(*j))?;
                }
            }
            None => {
                writeln!(out, "index,value")?;
                for (i, v) in self.values.iter().enumerate() {
                    writeln!(out, "{},{}", i + 1, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Draws `n` samples of `spec`; a pure function of `(spec, n, seed)`.
///
/// The Markov chain starts from its stationary marginal `f_c`.
pub fn sample_path(spec: &ProcessSpec, n: usize, seed: u64) -> Result<SamplePath> {
    spec.ensure_valid()?;
    if n == 0 {
        return Err(Error::arg("n", "path length must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n);
    let mut jump_indicators = None;
    match spec.kind {
        ProcessKind::IidContinuous => {
            let c = spec.continuous_part()?;
            values.extend((0..n).map(|_| c.sample(&mut rng)));
        }
        ProcessKind::IidMixture => {
            let c = spec.continuous_part()?;
            for _ in 0..n {
                let continuous = rng.random_bool(spec.p);
                values.push(if continuous { c.sample(&mut rng) } else { spec.atom });
            }
        }
        ProcessKind::IidDiscrete => {
            let weights = WeightedIndex::new(spec.discrete_pmf.iter().map(|&(_, q)| q))
                .map_err(|e| Error::arg("discrete_pmf", e.to_string()))?;
            values.extend((0..n).map(|_| spec.discrete_pmf[weights.sample(&mut rng)].0));
        }
        ProcessKind::PiecewiseConstantMarkov => {
            let c = spec.continuous_part()?;
            let mut jumps = Vec::with_capacity(n);
            let mut current = c.sample(&mut rng);
            values.push(current);
            jumps.push(false);
            for _ in 1..n {
                let jump = rng.random_bool(spec.p);
                if jump {
                    current = c.sample(&mut rng);
                }
                values.push(current);
                jumps.push(jump);
            }
            jump_indicators = Some(jumps);
        }
    }
    Ok(SamplePath {
        values,
        spec: spec.clone(),
        seed,
        jump_indicators,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpStatistics {
    pub count: usize,
    /// `count / (n-1)` for the Markov kind (index 1 is never a jump),
    /// `count / n` for mixtures.
    pub fraction: f64,
}

/// Jumps of a Markov path, or non-atom draws of a mixture path.
pub fn jump_statistics(path: &SamplePath) -> Result<JumpStatistics> {
    match path.spec.kind {
        ProcessKind::PiecewiseConstantMarkov => {
            let jumps = path
                .jump_indicators
                .as_ref()
                .ok_or(Error::MissingJumpIndicators)?;
            let count = jumps.iter().skip(1).filter(|&&j| j).count();
            let slots = jumps.len().saturating_sub(1);
            let fraction = if slots == 0 {
                0.0
            } else {
                count as f64 / slots as f64
            };
            Ok(JumpStatistics { count, fraction })
        }
        ProcessKind::IidMixture => {
            let count = path.values.iter().filter(|&&v| v != path.spec.atom).count();
            let fraction = count as f64 / path.len().max(1) as f64;
            Ok(JumpStatistics { count, fraction })
        }
        kind => Err(Error::Unsupported(format!("jump statistics of a {kind} path"))),
    }
}

fn round_sig(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    // Split into panels first so narrow features are not skipped.
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == panels { b } else { lo + h };
            // Stay inside the open support at the endpoints.
            let (fa, fb) = (f(lo.max(a + 1e-300).min(hi)), f(hi));
            let fm = f(0.5 * (lo + hi));
            let whole = simpson(fa, fm, fb, lo, hi);
            recurse(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, depth)
        })
        .sum()
}
