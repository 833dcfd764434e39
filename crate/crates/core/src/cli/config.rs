//! `section.key = value` experiment files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::bsde::AdjointVariant;
use crate::model::{hex16, Coefficient, ModelSpec};

/// Every recognized key with its default, in file order.
const KEYS: &[(&str, &str)] = &[
    ("model.preset", "tanh"),
    ("model.b", ""),
    ("model.sigma", ""),
    ("model.h", ""),
    ("model.f", ""),
    ("model.x0", ""),
    ("model.T", "1"),
    ("model.k", "0.25"),
    ("grid.n_steps", "50"),
    ("mc.n_paths", "2000"),
    ("mc.n_particles", "500"),
    ("mc.seed", "0"),
    ("mc.ess_threshold", "0.5"),
    ("bsde.degree", "3"),
    ("bsde.ridge_lambda", "1e-8"),
    ("bsde.variant", "consistent"),
    ("picard.max_iters", "20"),
    ("picard.damping", "0.5"),
    ("picard.tol", "0.02"),
    ("worst_case.k_values", ""),
    ("worst_case.n_buckets", "3"),
    ("worst_case.family", "feedback"),
    ("minimax.grid_size", "5"),
    ("saddle.n_probes", "10"),
    ("oracle.n_states", "5"),
    ("oracle.half_width", "1"),
    ("filter.path_id", "0"),
    ("output.dir", "out"),
    ("output.label", "run"),
];

/// Keys that may be overridden from the command line.
pub const OVERRIDABLE: &[&str] = &["mc.seed", "model.k", "mc.n_paths", "mc.n_particles", "output.dir"];

/// All problems found in a config file, each naming its key or line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Piecewise-constant open-loop drifts.
    OpenLoop,
    /// `k · s_j · sgn(f(x) − u)` feedback signs.
    Feedback,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    pub model: ModelSpec,
    pub n_steps: usize,
    pub n_paths: usize,
    pub n_particles: usize,
    pub seed: u64,
    pub ess_threshold: f64,
    pub degree: usize,
    /// Ridge penalty per path.
    pub ridge_lambda: f64,
    pub variant: AdjointVariant,
    pub max_iters: usize,
    pub damping: f64,
    pub tol: f64,
    pub k_values: Vec<f64>,
    pub n_buckets: usize,
    pub family: FamilyKind,
    pub grid_size: usize,
    pub n_probes: usize,
    pub n_states: usize,
    pub half_width: f64,
    pub filter_path_id: u64,
    pub out_dir: PathBuf,
    pub label: String,
    /// The resolved `key = value` pairs the run used, defaults included.
    pub resolved: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Hex digest of the resolved key/value pairs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.resolved {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex16(&h.finalize())
    }
}

fn suggest(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .map(|(k, _)| (*k, strsim::jaro_winkler(key, k)))
        .filter(|(_, s)| *s > 0.8)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

fn unknown(key: &str, where_: &str) -> String {
    match suggest(key) {
        Some(s) => format!("{where_}unknown key `{key}` (did you mean `{s}`?)"),
        None => format!("{where_}unknown key `{key}`"),
    }
}

/// Splits a file into `key = value` pairs, reporting malformed lines and unknown keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigErrors> {
    let (out, errors) = split_pairs(text);
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(ConfigErrors(errors))
    }
}

fn split_pairs(text: &str) -> (BTreeMap<String, String>, Vec<String>) {
    let mut errors = Vec::new();
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("line {}: ", i + 1);
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("{at}expected `section.key = value`, got `{line}`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.split('.').count() != 2 || k.split('.').any(str::is_empty) {
            errors.push(format!("{at}key `{k}` must have the form `section.key`"));
            continue;
        }
        if !KEYS.iter().any(|(known, _)| *known == k) {
            errors.push(unknown(k, &at));
            continue;
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            errors.push(format!("{at}duplicate key `{k}`"));
        }
    }
    (out, errors)
}

pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig, ConfigErrors> {
    let bytes = std::fs::read(path).map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    let text = String::from_utf8(bytes).map_err(|_| ConfigErrors(vec![format!("{} is not valid UTF-8", path.display())]))?;
    parse_config(&text, overrides)
}

/// Parses, applies overrides and validates, collecting every error.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig, ConfigErrors> {
    let (mut pairs, mut errors) = split_pairs(text);
    for (k, v) in overrides {
        if OVERRIDABLE.contains(&k.as_str()) {
            pairs.insert(k.clone(), v.clone());
        } else {
            errors.push(format!("`{k}` cannot be overridden from the command line"));
        }
    }
    let mut r = Resolver { pairs, errors, resolved: BTreeMap::new() };
    let cfg = r.build();
    match cfg {
        Some(c) if r.errors.is_empty() => Ok(ExperimentConfig { resolved: r.resolved, ..c }),
        _ => Err(ConfigErrors(r.errors)),
    }
}

struct Resolver {
    pairs: BTreeMap<String, String>,
    errors: Vec<String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    fn raw(&mut self, key: &str) -> String {
        let default = KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or("");
        let v = self.pairs.get(key).cloned().unwrap_or_else(|| default.to_string());
        if !v.is_empty() {
            self.resolved.insert(key.to_string(), v.clone());
        }
        v
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let v = self.raw(key);
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.errors.push(format!("`{key}`: expected {what}, got `{v}`"));
                None
            }
        }
    }

    fn real(&mut self, key: &str, ok: impl Fn(f64) -> bool, range: &str) -> Option<f64> {
        let v: f64 = self.parsed(key, "a number")?;
        if v.is_finite() && ok(v) {
            Some(v)
        } else {
            self.errors.push(format!("`{key}` = {v} is out of range: must be {range}"));
            None
        }
    }

    fn count(&mut self, key: &str, min: usize) -> Option<usize> {
        let v: usize = self.parsed(key, "a non-negative integer")?;
        if v >= min {
            Some(v)
        } else {
            self.errors.push(format!("`{key}` = {v} is out of range: must be at least {min}"));
            None
        }
    }

    fn coefficient(&mut self, key: &str, default: Coefficient) -> Option<Coefficient> {
        let v = self.raw(key);
        if v.is_empty() {
            return Some(default);
        }
        match v.parse::<Coefficient>() {
            Ok(c) => Some(c),
            Err(e) => {
                self.errors.push(format!("`{key}`: {e}"));
                None
            }
        }
    }

    fn build(&mut self) -> Option<ExperimentConfig> {
        let preset = self.raw("model.preset");
        let base = match preset.as_str() {
            "tanh" => Some(ModelSpec::tanh_benchmark(0.0)),
            "linear_gaussian" => ModelSpec::linear_gaussian(0.0, 1.0, 1.0, 0.0, 1.0).ok(),
            other => {
                self.errors.push(format!("`model.preset`: unknown preset `{other}` (expected tanh or linear_gaussian)"));
                None
            }
        };
        let fallback = base.clone().unwrap_or_else(|| ModelSpec::tanh_benchmark(0.0));
        let b = self.coefficient("model.b", fallback.b);
        let sigma = self.coefficient("model.sigma", fallback.sigma);
        let h = self.coefficient("model.h", fallback.h);
        let f = self.coefficient("model.f", fallback.f);
        let x0 = if self.raw("model.x0").is_empty() {
            Some(fallback.x0)
        } else {
            self.real("model.x0", |_| true, "finite")
        };
        let horizon = self.real("model.T", |v| v > 0.0, "positive");
        let k = self.real("model.k", |v| v >= 0.0, "non-negative");
        let n_steps = self.count("grid.n_steps", 1);
        let n_paths = self.count("mc.n_paths", 1);
        let n_particles = self.count("mc.n_particles", 2);
        let seed: Option<u64> = self.parsed("mc.seed", "a non-negative integer");
        let ess = self.real("mc.ess_threshold", |v| v > 0.0 && v <= 1.0, "in (0, 1]");
        let degree = self.count("bsde.degree", 0);
        let ridge = self.real("bsde.ridge_lambda", |v| v >= 0.0, "non-negative");
        let variant_raw = self.raw("bsde.variant");
        let variant = match variant_raw.parse::<AdjointVariant>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("`bsde.variant`: {e}"));
                None
            }
        };
        let max_iters = self.count("picard.max_iters", 1);
        let damping = self.real("picard.damping", |v| v > 0.0 && v <= 1.0, "in (0, 1]");
        let tol = self.real("picard.tol", |v| (0.0..1.0).contains(&v), "in [0, 1)");
        let k_raw = self.raw("worst_case.k_values");
        let k_values: Option<Vec<f64>> = if k_raw.is_empty() {
            k.map(|k| vec![k])
        } else {
            let parsed: Result<Vec<f64>, _> = k_raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.iter().all(|x| x.is_finite() && *x >= 0.0) && !v.is_empty() => Some(v),
                _ => {
                    self.errors.push(format!(
                        "`worst_case.k_values`: expected a comma-separated list of non-negative numbers, got `{k_raw}`"
                    ));
                    None
                }
            }
        };
        let n_buckets = self.count("worst_case.n_buckets", 1);
        if n_buckets.is_some_and(|n| n > 8) {
            self.errors.push("`worst_case.n_buckets` is out of range: must be at most 8".into());
        }
        let family = match self.raw("worst_case.family").as_str() {
            "feedback" => Some(FamilyKind::Feedback),
            "open_loop" => Some(FamilyKind::OpenLoop),
            other => {
                self.errors.push(format!("`worst_case.family`: expected feedback or open_loop, got `{other}`"));
                None
            }
        };
        let grid_size = self.count("minimax.grid_size", 1);
        let n_probes = self.count("saddle.n_probes", 0);
        let n_states = self.count("oracle.n_states", 2);
        let half_width = self.real("oracle.half_width", |v| v > 0.0, "positive");
        let filter_path_id: Option<u64> = self.parsed("filter.path_id", "a non-negative integer");
        let out_dir = self.raw("output.dir");
        if out_dir.is_empty() {
            self.errors.push("`output.dir` must not be empty".into());
        }
        let label = self.raw("output.label");

        let model = match (base, b, sigma, h, f, x0, horizon, k) {
            (Some(_), Some(b), Some(sigma), Some(h), Some(f), Some(x0), Some(horizon), Some(k)) => {
                match ModelSpec::new(b, sigma, h, f, x0, horizon, k) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        self.errors.push(format!("`model`: {e}"));
                        None
                    }
                }
            }
            _ => None,
        };
        if let (Some(n), Some(d)) = (n_paths, degree) {
            let p = (d + 1) * (d + 2) * (d + 3) / 6;
            if p * 10 > n {
                self.errors.push(format!(
                    "`mc.n_paths` = {n} is too small for `bsde.degree` = {d}: need at least {} paths",
                    p * 10
                ));
            }
        }
        Some(ExperimentConfig {
            preset,
            model: model?,
            n_steps: n_steps?,
            n_paths: n_paths?,
            n_particles: n_particles?,
            seed: seed?,
            ess_threshold: ess?,
            degree: degree?,
            ridge_lambda: ridge?,
            variant: variant?,
            max_iters: max_iters?,
            damping: damping?,
            tol: tol?,
            k_values: k_values?,
            n_buckets: n_buckets?,
            family: family?,
            grid_size: grid_size?,
            n_probes: n_probes?,
            n_states: n_states?,
            half_width: half_width?,
            filter_path_id: filter_path_id?,
            out_dir: PathBuf::from(out_dir),
            label,
            resolved: BTreeMap::new(),
        })
    }
}
