//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! problem = lj13
//! method = mlpf
//! kernel = sigmoid
//! initial = lj_seed:0
//! ```
//!
//! Every key is optional except `problem`; omitted keys take the frozen
//! per-problem defaults from [`RunConfig::defaults`].

use std::fmt;
use std::str::FromStr;

use crate::benchmarks::ProblemName;
use crate::error::{Error, Result};
use crate::mlpf::{KernelKind, Method};

/// Rows kept per trace file unless `full_trace` is set.
pub const MAX_TRACE_ROWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFileFormat {
    Csv,
    Json,
}

impl TraceFileFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFileFormat::Csv => "csv",
            TraceFileFormat::Json => "json",
        }
    }
}

impl FromStr for TraceFileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFileFormat::Csv),
            "json" => Ok(TraceFileFormat::Json),
            other => Err(Error::config("format", format!("unknown format `{other}`"))),
        }
    }
}

/// Where a run starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPoint {
    /// Index into the problem's canonical initials.
    Canonical(usize),
    Explicit(Vec<f64>),
    /// LJ-13 only: first seed tried by the local-minimum search.
    LjSeed(u64),
    /// Uniform draw from the domain box using `rng_seed`.
    Random,
}

impl fmt::Display for InitialPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialPoint::Canonical(k) => write!(f, "canonical:{k}"),
            InitialPoint::LjSeed(s) => write!(f, "lj_seed:{s}"),
            InitialPoint::Random => f.write_str("random"),
            InitialPoint::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
                f.write_str(&parts.join(", "))
            }
        }
    }
}

impl FromStr for InitialPoint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "random" {
            return Ok(InitialPoint::Random);
        }
        if let Some(k) = s.strip_prefix("canonical:") {
            return k
                .trim()
                .parse()
                .map(InitialPoint::Canonical)
                .map_err(|_| format!("bad canonical index `{k}`"));
        }
        if let Some(k) = s.strip_prefix("lj_seed:") {
            return k
                .trim()
                .parse()
                .map(InitialPoint::LjSeed)
                .map_err(|_| format!("bad seed `{k}`"));
        }
        s.split(',')
            .map(|p| parse_f64(p.trim()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(InitialPoint::Explicit)
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemName,
    pub method: Method,
    pub kernel: KernelKind,
    pub use_kdl: bool,
    pub kdl_offset: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub factorized: bool,
    pub max_steps: usize,
    pub cost_tol: f64,
    pub step_tol: f64,
    pub x_tol: Option<f64>,
    pub initial: InitialPoint,
    pub rng_seed: u64,
    /// `0` picks the stride so the file stays under [`MAX_TRACE_ROWS`].
    pub record_stride: usize,
    pub full_trace: bool,
    pub format: TraceFileFormat,
    /// Trace file name inside the output directory; derived when absent.
    pub output: Option<String>,
}

pub const KEYS: &[&str] = &[
    "problem",
    "method",
    "kernel",
    "use_kdl",
    "kdl_offset",
    "eta",
    "alpha",
    "beta",
    "factorized",
    "max_steps",
    "cost_tol",
    "step_tol",
    "x_tol",
    "initial",
    "rng_seed",
    "record_stride",
    "full_trace",
    "format",
    "output",
];

/// Frozen learning rate per problem and method.
pub fn default_eta(problem: ProblemName, method: Method) -> f64 {
    match (problem, method) {
        (ProblemName::Ctl, _) => 1e-3,
        (ProblemName::Dvg02, Method::Mlpf) => 2e-17,
        (ProblemName::Dvg02, Method::Taylor) => 1e-4,
        (ProblemName::Lj13, _) => 1e-4,
    }
}

impl RunConfig {
    pub fn defaults(problem: ProblemName, method: Method) -> Self {
        let (use_kdl, kdl_offset, max_steps, x_tol, initial) = match problem {
            ProblemName::Ctl => (false, 2.0, 100_000, Some(1e-3), InitialPoint::Canonical(0)),
            ProblemName::Dvg02 => (true, 1.0, 200_000, None, InitialPoint::Canonical(0)),
            ProblemName::Lj13 => (true, 50.0, 1_000_000, None, InitialPoint::LjSeed(0)),
        };
        Self {
            problem,
            method,
            kernel: KernelKind::Square,
            use_kdl,
            kdl_offset,
            eta: default_eta(problem, method),
            alpha: 1.0,
            beta: 1.0,
            factorized: false,
            max_steps,
            cost_tol: 1e-12,
            step_tol: 1e-300,
            x_tol,
            initial,
            rng_seed: 0,
            record_stride: 0,
            full_trace: false,
            format: TraceFileFormat::Csv,
            output: None,
        }
    }

    /// Range and cross-field checks.
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        positive("eta", self.eta)?;
        positive("kdl_offset", self.kdl_offset)?;
        positive("cost_tol", self.cost_tol)?;
        positive("step_tol", self.step_tol)?;
        if let Some(t) = self.x_tol {
            positive("x_tol", t)?;
        }
        if !self.alpha.is_finite() {
            return Err(Error::config("alpha", "must be finite"));
        }
        if !self.beta.is_finite() {
            return Err(Error::config("beta", "must be finite"));
        }
        if self.max_steps < 1 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        match (&self.initial, self.problem) {
            (InitialPoint::LjSeed(_), ProblemName::Lj13) => {}
            (InitialPoint::LjSeed(_), p) => {
                return Err(Error::config(
                    "initial",
                    format!("lj_seed applies to lj13, not {p}"),
                ))
            }
            (InitialPoint::Canonical(_) | InitialPoint::Random, ProblemName::Lj13) => {
                return Err(Error::config(
                    "initial",
                    "lj13 starts from lj_seed:N or an explicit coordinate list",
                ))
            }
            _ => {}
        }
        if let Some(name) = &self.output {
            if name.is_empty() || name.contains('/') || name.contains('\\') {
                return Err(Error::config("output", "must be a bare file name"));
            }
        }
        Ok(())
    }

    /// Trace file name, derived from the run settings unless `output` is set.
    pub fn file_name(&self) -> String {
        if let Some(name) = &self.output {
            return name.clone();
        }
        format!(
            "{}-{}.{}",
            self.problem,
            self.label(),
            self.format.extension()
        )
    }

    /// Short method label, e.g. `mlpf-sigmoid-kdl` or `taylor`.
    pub fn label(&self) -> String {
        match self.method {
            Method::Taylor => {
                if self.use_kdl {
                    "taylor-kdl".into()
                } else {
                    "taylor".into()
                }
            }
            Method::Mlpf => {
                let mut s = format!("mlpf-{}", self.kernel);
                if self.factorized {
                    s.push_str("-factorized");
                }
                s.push_str(if self.use_kdl { "-kdl" } else { "-nokdl" });
                s
            }
        }
    }

    /// Stride used when persisting the trace.
    pub fn effective_stride(&self) -> usize {
        if self.full_trace {
            1
        } else if self.record_stride > 0 {
            self.record_stride
        } else {
            // rows are iterations 0..=max_steps plus a possible final row
            (self.max_steps + 1).div_ceil(MAX_TRACE_ROWS - 1).max(1)
        }
    }

    /// Ordered `key = value` pairs covering every field.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt_f64);
        let mut pairs = vec![
            ("problem", self.problem.to_string()),
            ("method", self.method.to_string()),
            ("kernel", self.kernel.to_string()),
            ("use_kdl", self.use_kdl.to_string()),
            ("kdl_offset", fmt_f64(self.kdl_offset)),
            ("eta", fmt_f64(self.eta)),
            ("alpha", fmt_f64(self.alpha)),
            ("beta", fmt_f64(self.beta)),
            ("factorized", self.factorized.to_string()),
            ("max_steps", self.max_steps.to_string()),
            ("cost_tol", fmt_f64(self.cost_tol)),
            ("step_tol", fmt_f64(self.step_tol)),
            ("x_tol", opt(self.x_tol)),
            ("initial", self.initial.to_string()),
            ("rng_seed", self.rng_seed.to_string()),
            ("record_stride", self.record_stride.to_string()),
            ("full_trace", self.full_trace.to_string()),
            ("format", self.format.extension().to_string()),
        ];
        if let Some(o) = &self.output {
            pairs.push(("output", o.clone()));
        }
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |msg: String| Error::config(key, msg);
        match key {
            "problem" | "method" => {
                return Err(bad("must be set before other keys".into()));
            }
            "kernel" => {
                self.kernel = v
                    .parse()
                    .map_err(|_| bad(format!("unknown kernel `{v}`")))?
            }
            "use_kdl" => self.use_kdl = parse_bool(v).map_err(bad)?,
            "kdl_offset" => self.kdl_offset = parse_f64(v).map_err(bad)?,
            "eta" => self.eta = parse_f64(v).map_err(bad)?,
            "alpha" => self.alpha = parse_f64(v).map_err(bad)?,
            "beta" => self.beta = parse_f64(v).map_err(bad)?,
            "factorized" => self.factorized = parse_bool(v).map_err(bad)?,
            "max_steps" => self.max_steps = parse_count(v).map_err(bad)?,
            "cost_tol" => self.cost_tol = parse_f64(v).map_err(bad)?,
            "step_tol" => self.step_tol = parse_f64(v).map_err(bad)?,
            "x_tol" => {
                self.x_tol = if v == "none" {
                    None
                } else {
                    Some(parse_f64(v).map_err(bad)?)
                }
            }
            "initial" => self.initial = v.parse().map_err(bad)?,
            "rng_seed" => self.rng_seed = v.parse().map_err(|_| bad(format!("bad seed `{v}`")))?,
            "record_stride" => self.record_stride = parse_count(v).map_err(bad)?,
            "full_trace" => self.full_trace = parse_bool(v).map_err(bad)?,
            "format" => self.format = v.parse()?,
            "output" => {
                self.output = if v.is_empty() {
                    None
                } else {
                    Some(v.to_string())
                }
            }
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Renders the config in the file format accepted by [`parse_config`].
    pub fn emit(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            s.push_str(&k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }
}

/// One `key = value` line with its 1-based line number (`0` for overrides).
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits a config document into entries, rejecting malformed lines,
/// unknown keys and duplicates.
pub fn parse_entries(source: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if text.is_empty() {
            continue;
        }
        let Some((k, v)) = text.split_once('=') else {
            return Err(Error::Parse {
                line,
                message: format!("expected `key = value`, got `{text}`"),
            });
        };
        let key = k.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        entries.push(Entry {
            key: key.to_string(),
            value: v.trim().to_string(),
            line,
        });
    }
    Ok(entries)
}

/// Builds a config from entries: `problem` and `method` pick the defaults,
/// the remaining keys override them in order.
pub fn resolve(entries: &[Entry]) -> Result<RunConfig> {
    let locate = |e: &Entry, err: Error| -> Error {
        if e.line == 0 {
            return err;
        }
        let message = match err {
            Error::Config { field, message } => format!("invalid value for `{field}`: {message}"),
            other => other.to_string(),
        };
        Error::Parse {
            line: e.line,
            message,
        }
    };
    let find = |key: &str| entries.iter().rev().find(|e| e.key == key);
    let problem_entry = find("problem").ok_or_else(|| Error::config("problem", "missing"))?;
    let problem: ProblemName = problem_entry
        .value
        .parse()
        .map_err(|e| locate(problem_entry, e))?;
    let method = match find("method") {
        Some(e) => e.value.parse().map_err(|err| locate(e, err))?,
        None => Method::Mlpf,
    };
    let mut cfg = RunConfig::defaults(problem, method);
    for e in entries {
        if e.key == "problem" || e.key == "method" {
            continue;
        }
        cfg.set(&e.key, &e.value).map_err(|err| locate(e, err))?;
    }
    if let Err(err) = cfg.validate() {
        // point at the offending line when the field came from the file
        if let Error::Config { field, .. } = &err {
            if let Some(e) = find(field) {
                return Err(locate(e, err));
            }
        }
        return Err(err);
    }
    Ok(cfg)
}

/// Parses and validates a config document.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    resolve(&parse_entries(source)?)
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .map_err(|_| format!("`{s}` is not a number"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("`{s}` is not a boolean")),
    }
}

/// Non-negative integer, also accepting exact float notation like `1e5`.
fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= 1e15 => Ok(v as usize),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config("problem = ctl\nmethod = mlpf\n").unwrap();
        assert_eq!(cfg.kernel, KernelKind::Square);
        assert_eq!(cfg.initial, InitialPoint::Canonical(0));
        assert_eq!(cfg.eta, default_eta(ProblemName::Ctl, Method::Mlpf));
    }

    #[test]
    fn negative_eta_names_the_field_and_line() {
        let err = parse_config("problem = ctl\n\neta = -1\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{msg}");
        assert!(msg.contains("eta"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_config("problem = ctl\nlearning_rate = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_config("problem = ctl\neta = 1\neta = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn missing_equals_is_a_parse_error() {
        let err = parse_config("problem ctl\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# header\n\nproblem = dvg02 # trailing\n  \n").unwrap();
        assert_eq!(cfg.problem, ProblemName::Dvg02);
    }

    #[test]
    fn lj_seed_only_for_lj13() {
        assert!(parse_config("problem = ctl\ninitial = lj_seed:2\n").is_err());
        let cfg = parse_config("problem = lj13\ninitial = lj_seed:2\n").unwrap();
        assert_eq!(cfg.initial, InitialPoint::LjSeed(2));
    }

    #[test]
    fn explicit_initial_parses() {
        let cfg = parse_config("problem = ctl\ninitial = 1.5, -2\n").unwrap();
        assert_eq!(cfg.initial, InitialPoint::Explicit(vec![1.5, -2.0]));
    }

    #[test]
    fn auto_stride_bounds_row_count() {
        let mut cfg = RunConfig::defaults(ProblemName::Dvg02, Method::Mlpf);
        cfg.max_steps = 10_000_000;
        let k = cfg.effective_stride();
        assert!((cfg.max_steps / k + 2) <= MAX_TRACE_ROWS);
        cfg.full_trace = true;
        assert_eq!(cfg.effective_stride(), 1);
    }

    #[test]
    fn max_steps_accepts_float_notation() {
        let cfg = parse_config("problem = ctl\nmax_steps = 1e5\n").unwrap();
        assert_eq!(cfg.max_steps, 100_000);
    }
}
