//! The two scalar quantizers: the `b`-bit truncation `[x]_b = ⌊2^b x⌋ / 2^b`
//! and the `b`-level map `⟨x⟩_b = ⌊b x⌋ / b`.
//!
//! Codes are integers; entropy counting works on codes, never on the
//! reconstructed reals.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::SamplePath;

/// Largest `b` accepted by the `b`-bit scheme.
pub const MAX_BBIT: u32 = 52;
/// Codes must stay exactly representable as `f64`.
const CODE_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Bbit,
    Blevel,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Bbit => "bbit",
            SchemeKind::Blevel => "blevel",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantScheme {
    pub scheme: SchemeKind,
    pub b: u32,
}

impl QuantScheme {
    pub fn bbit(b: u32) -> Self {
        Self {
            scheme: SchemeKind::Bbit,
            b,
        }
    }

    pub fn blevel(b: u32) -> Self {
        Self {
            scheme: SchemeKind::Blevel,
            b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::arg("b", "resolution must be at least 1"));
        }
        if self.scheme == SchemeKind::Bbit && self.b > MAX_BBIT {
            return Err(Error::arg("b", format!("bbit resolution capped at {MAX_BBIT}")));
        }
        Ok(())
    }

    /// Cell width: `2^-b` or `1/b`.
    pub fn step(&self) -> f64 {
        match self.scheme {
            SchemeKind::Bbit => (-(self.b as f64)).exp2(),
            SchemeKind::Blevel => 1.0 / self.b as f64,
        }
    }

    /// Resolution in bits, the abscissa of dimension fits: `b` or `log2 b`.
    pub fn resolution_bits(&self) -> f64 {
        match self.scheme {
            SchemeKind::Bbit => self.b as f64,
            SchemeKind::Blevel => (self.b as f64).log2(),
        }
    }

    /// Reconstruction value of `code`.
    pub fn value_of(&self, code: i64) -> f64 {
        match self.scheme {
            SchemeKind::Bbit => code as f64 * self.step(),
            SchemeKind::Blevel => code as f64 / self.b as f64,
        }
    }
}

/// Quantizes one scalar; returns `(code, value)` with `value <= x < next`.
pub fn quantize_scalar(x: f64, scheme: QuantScheme) -> Result<(i64, f64)> {
    scheme.validate()?;
    let code = scalar_code(x, scheme)?;
    Ok((code, scheme.value_of(code)))
}

fn scalar_code(x: f64, scheme: QuantScheme) -> Result<i64> {
    if !x.is_finite() {
        return Err(Error::arg("x", format!("non-finite input {x}")));
    }
    let b = scheme.b;
    match scheme.scheme {
        SchemeKind::Bbit => {
            // Scaling by a power of two is exact.
            let scaled = (x * (b as f64).exp2()).floor();
            if scaled.abs() >= CODE_LIMIT {
                return Err(Error::QuantizerOverflow { x, b });
            }
            Ok(scaled as i64)
        }
        SchemeKind::Blevel => {
            let levels = b as f64;
            let scaled = (x * levels).floor();
            if scaled.abs() >= CODE_LIMIT - 2.0 {
                return Err(Error::QuantizerOverflow { x, b });
            }
            // b·x is rounded; settle the code against the rounded reconstruction.
            let mut code = scaled as i64;
            while code as f64 / levels > x {
                code -= 1;
            }
            while (code + 1) as f64 / levels <= x {
                code += 1;
            }
            Ok(code)
        }
    }
}

/// Identity of the path a quantized stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathIdentity {
    pub seed: u64,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedPath {
    pub codes: Vec<i64>,
    pub scheme: QuantScheme,
    pub source: Option<PathIdentity>,
}

impl QuantizedPath {
    pub fn from_codes(codes: Vec<i64>, scheme: QuantScheme) -> Self {
        Self {
            codes,
            scheme,
            source: None,
        }
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.codes.iter().map(|&c| self.scheme.value_of(c))
    }

    /// CSV with columns `index,code`, 1-based index.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,code")?;
        for (i, c) in self.codes.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, c)?;
        }
        Ok(())
    }
}

pub fn quantize_values(values: &[f64], scheme: QuantScheme) -> Result<Vec<i64>> {
    scheme.validate()?;
    values.iter().map(|&x| scalar_code(x, scheme)).collect()
}

pub fn quantize_path(path: &SamplePath, scheme: QuantScheme) -> Result<QuantizedPath> {
    Ok(QuantizedPath {
        codes: quantize_values(&path.values, scheme)?,
        scheme,
        source: Some(PathIdentity {
            seed: path.seed,
            len: path.len(),
        }),
    })
}

/// Counterexamples found by [`check_quantizer_invariants`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantizerAudit {
    pub checked: usize,
    pub error_bound: usize,
    pub idempotence: usize,
    pub monotonicity: usize,
    pub refinement: usize,
}

impl QuantizerAudit {
    pub fn failures(&self) -> usize {
        self.error_bound + self.idempotence + self.monotonicity + self.refinement
    }
}

/// Audits a quantizer implementation against the error bound, idempotence,
/// monotonicity (on consecutive sorted inputs) and bbit refinement
/// consistency. Taking the quantizer as a parameter lets tests audit
/// deliberately broken variants.
pub fn check_quantizer_invariants<F>(quantize: F, xs: &[f64], scheme: QuantScheme) -> QuantizerAudit
where
    F: Fn(f64, QuantScheme) -> Result<(i64, f64)>,
{
    let mut audit = QuantizerAudit::default();
    let step = scheme.step();
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut prev: Option<f64> = None;
    for &x in &sorted {
        audit.checked += 1;
        let Ok((code, q)) = quantize(x, scheme) else {
            audit.error_bound += 1;
            continue;
        };
        let upper = scheme.value_of(code + 1);
        if !(q <= x && x < upper && x - q < step * (1.0 + 1e-12)) {
            audit.error_bound += 1;
        }
        match quantize(q, scheme) {
            Ok((c2, _)) if c2 == code => {}
            _ => audit.idempotence += 1,
        }
        if let Some(p) = prev {
            if p > q {
                audit.monotonicity += 1;
            }
        }
        prev = Some(q);
        if scheme.scheme == SchemeKind::Bbit && scheme.b < MAX_BBIT {
            let finer = QuantScheme::bbit((scheme.b + 7).min(MAX_BBIT));
            match quantize(x, finer) {
                // The finer grid cannot represent x exactly; nothing to compare.
                Err(Error::QuantizerOverflow { .. }) => {}
                Ok((_, fq)) if matches!(quantize(fq, scheme), Ok((c3, _)) if c3 == code) => {}
                _ => audit.refinement += 1,
            }
        }
    }
    audit
}
