//! Flat `key = value` experiment configuration with dotted section prefixes.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::Path;

use mesofluct::cumulants::compare::DEFAULT_TRACE_NORM_ROWS;
use mesofluct::{CompareOptions, Error, MesoscopicFrame, PoleCombination, SampledC1, TestFunction, WeightSpec};
use num_complex::Complex64;

use crate::error::CliError;

const WEIGHT_KEYS: &[&str] = &["kind", "gamma1", "gamma2", "h", "center", "a", "a_seq", "b_seq", "beta", "amplitude", "seed"];

const KEYS: &[&str] = &[
    "seed",
    "frame.x0",
    "frame.alpha",
    "frame.n",
    "f.kind",
    "f.c",
    "f.eta",
    "f.path",
    "f.support",
    "cumulants.orders",
    "recurrence.n",
    "resolvent.lambda",
    "resolvent.rows",
    "resolvent.cols",
    "resolvent.radius",
    "compare.orders",
    "compare.beta",
    "compare.trace_norm_rows",
    "identities.n",
    "identities.x0",
    "identities.alpha",
    "identities.sizes",
    "identities.t",
    "identities.tol",
    "sample.count",
    "sample.nodes",
    "sample.max_m",
];

/// Parsed `key = value` pairs; `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::validation("config", format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim().to_string();
            if !is_known(&key) {
                return Err(CliError::validation(key, "unknown key"));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::validation(key, format!("line {}: duplicate key", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_item(key, v),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key).ok_or_else(|| CliError::validation(key, "required"))?;
        parse_item(key, v)
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => split(v).map(|s| parse_item(key, s)).collect(),
        }
    }

    fn complex_list(&self, key: &str, default: Vec<Complex64>) -> Result<Vec<Complex64>, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => split(v).map(|s| parse_complex(key, s)).collect(),
        }
    }

    fn range(&self, key: &str, default: RangeInclusive<usize>) -> Result<RangeInclusive<usize>, CliError> {
        let Some(v) = self.get(key) else { return Ok(default) };
        let (lo, hi) = v.split_once("..").ok_or_else(|| CliError::validation(key, format!("`{v}` is not of the form lo..hi")))?;
        let (lo, hi): (usize, usize) = (parse_item(key, lo)?, parse_item(key, hi)?);
        if lo < 1 || hi < lo {
            return Err(CliError::validation(key, "need 1 <= lo <= hi"));
        }
        Ok(lo..=hi)
    }
}

fn is_known(key: &str) -> bool {
    if KEYS.contains(&key) {
        return true;
    }
    ["weight.", "target."].iter().any(|p| key.strip_prefix(p).is_some_and(|rest| WEIGHT_KEYS.contains(&rest)))
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_item<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| CliError::validation(key, format!("cannot parse `{}`", v.trim())))
}

/// `re:im`.
fn parse_complex(key: &str, v: &str) -> Result<Complex64, CliError> {
    let (re, im) = v.split_once(':').ok_or_else(|| CliError::validation(key, format!("`{v}` is not of the form re:im")))?;
    Ok(Complex64::new(parse_item(key, re)?, parse_item(key, im)?))
}

fn weight_spec(raw: &RawConfig, prefix: &str) -> Result<WeightSpec, CliError> {
    let key = |k: &str| format!("{prefix}.{k}");
    let kind: String = raw.scalar(&key("kind"), "free".to_string())?;
    let spec = match kind.as_str() {
        "free" => WeightSpec::free(),
        "legendre" => WeightSpec::legendre(),
        "jacobi" => WeightSpec::ModifiedJacobi {
            gamma1: raw.scalar(&key("gamma1"), 0.0)?,
            gamma2: raw.scalar(&key("gamma2"), 0.0)?,
            h: raw.list(&key("h"), vec![1.0])?,
        },
        "chebyshev" => WeightSpec::FreeChebyshev { center: raw.scalar(&key("center"), 0.0)?, a: raw.scalar(&key("a"), 1.0)? },
        "explicit" => WeightSpec::Explicit { a: raw.list(&key("a_seq"), vec![])?, b: raw.list(&key("b_seq"), vec![])? },
        "perturbed" => WeightSpec::PerturbedFree {
            beta: raw.required(&key("beta"))?,
            amplitude: raw.required(&key("amplitude"))?,
            seed: raw.scalar(&key("seed"), 0)?,
        },
        other => {
            return Err(CliError::validation(
                key("kind"),
                format!("`{other}` is not one of free, legendre, jacobi, chebyshev, explicit, perturbed"),
            ))
        }
    };
    spec.validate().map_err(|e| weight_error(e, prefix))?;
    Ok(spec)
}

/// Rename the core's weight fields to the keys under `prefix`.
fn weight_error(e: Error, prefix: &str) -> CliError {
    let field = match &e {
        Error::InvalidInput { field, .. } => match field.as_str() {
            "a" => "a_seq".to_string(),
            "b" => "b_seq".to_string(),
            f => f.strip_prefix("weight.").unwrap_or(f).to_string(),
        },
        Error::NonPositiveWeight { .. } => "h".to_string(),
        _ => "kind".to_string(),
    };
    CliError::core(e, &format!("{prefix}.{field}")).with_field(format!("{prefix}.{field}"))
}

fn test_function(raw: &RawConfig) -> Result<TestFunction, CliError> {
    let kind: String = raw.scalar("f.kind", "poles".to_string())?;
    match kind.as_str() {
        "poles" => {
            let c = raw.list("f.c", vec![1.0])?;
            let eta = raw.complex_list("f.eta", vec![Complex64::new(0.0, 1.0)])?;
            Ok(PoleCombination::new(c, eta).map_err(|e| CliError::core(e, "f.c"))?.into())
        }
        "sampled" => {
            let path: String = raw.required("f.path")?;
            let (x, v, d) = read_samples(Path::new(&path))?;
            let support = match raw.get("f.support") {
                None => (x[0], *x.last().unwrap()),
                Some(_) => {
                    let s: Vec<f64> = raw.list("f.support", vec![])?;
                    if s.len() != 2 {
                        return Err(CliError::validation("f.support", "expected lo, hi"));
                    }
                    (s[0], s[1])
                }
            };
            Ok(SampledC1::new(x, v, d, support).map_err(|e| CliError::core(e, "f.path"))?.into())
        }
        other => Err(CliError::validation("f.kind", format!("`{other}` is not one of poles, sampled"))),
    }
}

/// Three-column CSV `x, value, derivative` with a header row.
fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::validation("f.path", e.to_string()))?;
    let (mut x, mut v, mut d) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::validation("f.path", e.to_string()))?;
        if rec.len() != 3 {
            return Err(CliError::validation("f.path", format!("row {}: expected 3 columns", i + 1)));
        }
        x.push(parse_item("f.path", &rec[0])?);
        v.push(parse_item("f.path", &rec[1])?);
        d.push(parse_item("f.path", &rec[2])?);
    }
    if x.len() < 2 {
        return Err(CliError::validation("f.path", "need at least two samples"));
    }
    Ok((x, v, d))
}

fn frames(raw: &RawConfig) -> Result<Vec<MesoscopicFrame>, CliError> {
    let x0: Vec<f64> = raw.list("frame.x0", vec![0.0])?;
    let alpha: Vec<f64> = raw.list("frame.alpha", vec![0.5])?;
    let ns: Vec<usize> = raw.list("frame.n", vec![100])?;
    if x0.is_empty() || alpha.is_empty() || ns.is_empty() {
        return Err(CliError::validation("frame", "x0, alpha and n lists must be non-empty"));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::validation("frame.n", "must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(x0.len() * alpha.len() * ns.len());
    for &x in &x0 {
        for &a in &alpha {
            for &n in &ns {
                out.push(MesoscopicFrame::new(x, a, n).map_err(|e| CliError::core(e, "frame"))?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ResolventSettings {
    pub lambda: Complex64,
    pub rows: RangeInclusive<usize>,
    pub cols: RangeInclusive<usize>,
    pub radius: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct IdentitySettings {
    pub n: usize,
    pub x0: f64,
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub t: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct SampleSettings {
    pub count: usize,
    /// Grid nodes per retained point.
    pub nodes: usize,
    pub max_m: usize,
}

/// Everything a subcommand may need, validated up front.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub weight: WeightSpec,
    pub target: Option<WeightSpec>,
    pub frames: Vec<MesoscopicFrame>,
    pub f: TestFunction,
    pub orders: Vec<usize>,
    pub compare_orders: Vec<usize>,
    pub compare: CompareOptions,
    pub seed: u64,
    pub recurrence_n: usize,
    pub resolvent: ResolventSettings,
    pub identities: IdentitySettings,
    pub sample: SampleSettings,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let weight = weight_spec(raw, "weight")?;
        let target = if raw.has_prefix("target.") { Some(weight_spec(raw, "target")?) } else { None };
        let orders = raw.list("cumulants.orders", vec![1, 2])?;
        let compare_orders = raw.list("compare.orders", vec![2])?;
        for (key, list) in [("cumulants.orders", &orders), ("compare.orders", &compare_orders)] {
            if list.is_empty() || list.contains(&0) {
                return Err(CliError::validation(key, "orders must be non-empty and positive"));
            }
        }
        let beta = match raw.get("compare.beta") {
            None => None,
            Some(_) => Some(raw.required::<f64>("compare.beta")?),
        };
        let compare = CompareOptions { beta, trace_norm_rows: raw.scalar("compare.trace_norm_rows", DEFAULT_TRACE_NORM_ROWS)? };
        let recurrence_n = raw.scalar("recurrence.n", 100usize)?;
        if recurrence_n == 0 {
            return Err(CliError::validation("recurrence.n", "must be at least 1"));
        }
        let lambda = match raw.get("resolvent.lambda") {
            None => Complex64::new(0.0, 0.5),
            Some(v) => parse_complex("resolvent.lambda", v)?,
        };
        if !(lambda.im > 0.0) {
            return Err(CliError::validation("resolvent.lambda", "imaginary part must be positive"));
        }
        let resolvent = ResolventSettings {
            lambda,
            rows: raw.range("resolvent.rows", 1..=20)?,
            cols: raw.range("resolvent.cols", 1..=20)?,
            radius: match raw.get("resolvent.radius") {
                None => None,
                Some(_) => Some(raw.required("resolvent.radius")?),
            },
        };
        let identities = IdentitySettings {
            n: raw.scalar("identities.n", 100)?,
            x0: raw.scalar("identities.x0", 0.0)?,
            alpha: raw.scalar("identities.alpha", 0.5)?,
            sizes: raw.list("identities.sizes", vec![100, 200])?,
            t: raw.list("identities.t", vec![0.05, 0.1])?,
            tol: raw.scalar("identities.tol", 1e-6)?,
        };
        if !(identities.x0 > -2.0 && identities.x0 < 2.0) {
            return Err(CliError::validation("identities.x0", "must lie in (-2, 2)"));
        }
        if !(identities.alpha > 0.0 && identities.alpha < 1.0) {
            return Err(CliError::validation("identities.alpha", "must lie in (0, 1)"));
        }
        if identities.n == 0 {
            return Err(CliError::validation("identities.n", "must be at least 1"));
        }
        if identities.sizes.is_empty() || identities.sizes.iter().any(|&s| s < 2) {
            return Err(CliError::validation("identities.sizes", "sizes must be at least 2"));
        }
        if identities.t.iter().any(|t| !t.is_finite()) {
            return Err(CliError::validation("identities.t", "must be finite"));
        }
        let sample = SampleSettings {
            count: raw.scalar("sample.count", 1000)?,
            nodes: raw.scalar("sample.nodes", mesofluct::sampler::NODES_PER_POINT)?,
            max_m: raw.scalar("sample.max_m", 4)?,
        };
        if sample.nodes < 1 {
            return Err(CliError::validation("sample.nodes", "must be at least 1"));
        }
        Ok(Self {
            weight,
            target,
            frames: frames(raw)?,
            f: test_function(raw)?,
            orders,
            compare_orders,
            compare,
            seed: raw.scalar("seed", 0)?,
            recurrence_n,
            resolvent,
            identities,
            sample,
        })
    }
}
