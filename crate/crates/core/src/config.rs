//! Experiment configuration: a JSON document plus dotted-path overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::entropy::Estimator;
use crate::error::{Error, Result};
use crate::oracles::OracleCurve;
use crate::process::ProcessSpec;
use crate::quantizer::SchemeKind;
use crate::rd::{BaOptions, SGrid, MAX_BLOCK_LEN, MAX_CELLS};
use crate::rdd::{RddCurveKind, DEFAULT_SAFETY_FACTOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Simulate,
    Id,
    Rd,
    Rdd,
    Verify,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Id => "id",
            Task::Rd => "rd",
            Task::Rdd => "rdd",
            Task::Verify => "verify",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(Value::String(name.to_string()))
            .map_err(|_| Error::Config(format!("unknown task `{name}`")))
    }
}

/// `count` log-spaced distortions from `10^start_exponent` to
/// `10^stop_exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DGrid {
    pub start_exponent: f64,
    pub stop_exponent: f64,
    pub count: usize,
}

impl DGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![10f64.powf(self.start_exponent)],
            c => (0..c)
                .map(|i| {
                    let t = i as f64 / (c - 1) as f64;
                    10f64.powf(self.start_exponent + (self.stop_exponent - self.start_exponent) * t)
                })
                .collect(),
        }
    }
}

/// A closed-form curve sampled on a distortion grid, used as `rdd` input in
/// place of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleInput {
    pub curve: OracleCurve,
    pub d_grid: DGrid,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("dimlab_out")
}

fn default_m() -> usize {
    1
}

fn default_tol() -> f64 {
    BaOptions::default().tol
}

fn default_max_iter() -> usize {
    BaOptions::default().max_iter
}

fn default_safety() -> f64 {
    DEFAULT_SAFETY_FACTOR
}

fn default_scheme() -> SchemeKind {
    SchemeKind::Bbit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub spec: Option<ProcessSpec>,
    /// Path length for `simulate` and `id`.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub k_max: usize,
    #[serde(default)]
    pub b_grid: Option<Vec<u32>>,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeKind,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Cells of the continuous part for `rd` and `rdd`.
    #[serde(default, rename = "N")]
    pub n_cells: Option<usize>,
    #[serde(default)]
    pub s_grid: Option<SGrid>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default)]
    pub rdd_curve: RddCurveKind,
    /// `rdd` only: fit a previously exported curve instead of solving.
    #[serde(default)]
    pub curve_csv: Option<PathBuf>,
    /// `rdd` only: fit a closed-form curve instead of solving.
    #[serde(default)]
    pub oracle: Option<OracleInput>,
    /// `verify` only.
    #[serde(default)]
    pub quick: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// A config with every optional field unset.
    pub fn new(task: Task) -> Self {
        serde_json::from_value(serde_json::json!({ "task": task })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, applies `key=value` overrides and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: malformed JSON: {e}", path.display())))?;
        apply_overrides(&mut value, overrides)?;
        let cfg = Self::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Compact JSON with keys in sorted order.
    pub fn canonical_json(&self) -> String {
        // serde_json's map is a BTreeMap here, so a round trip through Value
        // sorts the keys.
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn artifact_stem(&self) -> String {
        format!("{}_{}", self.task.name(), self.hash_hex())
    }

    pub fn ba_options(&self) -> BaOptions {
        BaOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            trace: false,
        }
    }

    /// Checks that the fields the task needs are present and in range.
    pub fn validate(&self) -> Result<()> {
        let missing = |field: &str| {
            Err(Error::Config(format!(
                "task `{}` requires `{field}`",
                self.task.name()
            )))
        };
        let spec_ok = |spec: &Option<ProcessSpec>| -> Result<()> {
            match spec {
                None => missing("spec"),
                Some(s) => {
                    let report = s.validate();
                    if report.is_ok() {
                        Ok(())
                    } else {
                        Err(Error::InvalidSpec(report))
                    }
                }
            }
        };
        match self.task {
            Task::Simulate => {
                spec_ok(&self.spec)?;
                if self.n.is_none() {
                    return missing("n");
                }
            }
            Task::Id => {
                spec_ok(&self.spec)?;
                if self.n.is_none() {
                    return missing("n");
                }
                match &self.b_grid {
                    None => return missing("b_grid"),
                    Some(g) if g.len() < 3 => {
                        return Err(Error::Config(format!(
                            "`b_grid` needs at least 3 resolutions, got {}",
                            g.len()
                        )))
                    }
                    _ => {}
                }
            }
            Task::Rd | Task::Rdd => {
                let sources = [
                    self.spec.is_some(),
                    self.curve_csv.is_some(),
                    self.oracle.is_some(),
                ];
                let given = sources.iter().filter(|&&b| b).count();
                if self.task == Task::Rd && (self.curve_csv.is_some() || self.oracle.is_some()) {
                    return Err(Error::Config(
                        "`curve_csv` and `oracle` apply to task `rdd` only".into(),
                    ));
                }
                if given == 0 {
                    return missing("spec");
                }
                if given > 1 {
                    return Err(Error::Config(
                        "give exactly one of `spec`, `curve_csv`, `oracle`".into(),
                    ));
                }
                if self.spec.is_some() {
                    spec_ok(&self.spec)?;
                    match self.n_cells {
                        None => return missing("N"),
                        Some(n) if n == 0 || n > MAX_CELLS => {
                            return Err(Error::Config(format!("`N` must lie in 1..={MAX_CELLS}, got {n}")))
                        }
                        _ => {}
                    }
                    match self.s_grid {
                        None => return missing("s_grid"),
                        Some(g) if g.count == 0 => {
                            return Err(Error::Config("`s_grid.count` must be positive".into()))
                        }
                        _ => {}
                    }
                    if self.m == 0 || self.m > MAX_BLOCK_LEN {
                        return Err(Error::Config(format!(
                            "`m` must lie in 1..={MAX_BLOCK_LEN}, got {}",
                            self.m
                        )));
                    }
                    if !(self.tol > 0.0) {
                        return Err(Error::Config("`tol` must be positive".into()));
                    }
                    if self.max_iter == 0 {
                        return Err(Error::Config("`max_iter` must be positive".into()));
                    }
                }
                if !(self.safety_factor > 0.0) {
                    return Err(Error::Config("`safety_factor` must be positive".into()));
                }
            }
            Task::Verify => {}
        }
        Ok(())
    }
}

/// Applies `a.b.c=value` assignments. A leading `--` is stripped. The value
/// is parsed as JSON and falls back to a plain string, so `--spec.p=0.2`
/// sets a number and `--scheme=blevel` a string.
pub fn apply_overrides(target: &mut Value, overrides: &[String]) -> Result<()> {
    for raw in overrides {
        let item = raw.strip_prefix("--").unwrap_or(raw);
        let (path, text) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))?;
        if path.is_empty() || path.split('.').any(str::is_empty) {
            return Err(Error::Config(format!("override `{raw}` has an empty key")));
        }
        let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
        let mut node = &mut *target;
        let keys: Vec<&str> = path.split('.').collect();
        for (i, key) in keys.iter().enumerate() {
            if !node.is_object() {
                if node.is_null() {
                    *node = Value::Object(Default::default());
                } else {
                    return Err(Error::Config(format!(
                        "override `{raw}`: `{}` is not an object",
                        keys[..i].join(".")
                    )));
                }
            }
            let map = node.as_object_mut().expect("checked above");
            if i + 1 == keys.len() {
                map.insert((*key).to_string(), value.clone());
                break;
            }
            node = map.entry((*key).to_string()).or_insert(Value::Null);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id_config() -> Value {
        serde_json::json!({
            "task": "id",
            "spec": {"kind": "iid_mixture", "p": 0.5,
                     "continuous": {"family": "uniform", "support_low": 0.0, "support_high": 1.0}},
            "n": 1000,
            "b_grid": [4, 6, 8]
        })
    }

    #[test]
    fn overrides_set_numbers_strings_and_new_objects() {
        let mut v = id_config();
        apply_overrides(
            &mut v,
            &[
                "--spec.p=0.2".into(),
                "scheme=blevel".into(),
                "--s_grid.count=3".into(),
            ],
        )
        .unwrap();
        assert_eq!(v["spec"]["p"], 0.2);
        assert_eq!(v["scheme"], "blevel");
        assert_eq!(v["s_grid"]["count"], 3);
        assert!(apply_overrides(&mut v, &["spec.p".into()]).is_err());
        assert!(apply_overrides(&mut v, &["n.x=1".into()]).is_err());
    }

    #[test]
    fn missing_field_is_named() {
        let mut v = id_config();
        v.as_object_mut().unwrap().remove("b_grid");
        let err = ExperimentConfig::from_value(v).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("b_grid"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v = id_config();
        v["bgrid"] = serde_json::json!([1]);
        assert!(matches!(ExperimentConfig::from_value(v), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = ExperimentConfig::from_value(id_config()).unwrap();
        let once = cfg.to_json_pretty();
        let twice = ExperimentConfig::from_json(&once).unwrap().to_json_pretty();
        assert_eq!(once, twice);
        assert_eq!(cfg.hash_hex().len(), 12);
        assert_eq!(cfg.artifact_stem(), format!("id_{}", cfg.hash_hex()));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_value(id_config()).unwrap();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash_hex(), b.hash_hex());
        assert_eq!(a.hash_hex(), a.clone().hash_hex());
    }

    #[test]
    fn d_grid_is_log_spaced() {
        let g = DGrid {
            start_exponent: -4.0,
            stop_exponent: -1.0,
            count: 4,
        }
        .values();
        for (v, e) in g.iter().zip([1e-4, 1e-3, 1e-2, 1e-1]) {
            assert!((v / e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn task_names() {
        assert_eq!(Task::parse("rdd").unwrap(), Task::Rdd);
        assert!(Task::parse("plot").is_err());
    }
}
