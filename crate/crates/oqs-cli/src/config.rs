//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! [corrme_jx]
//! n = 10
//! beta = 1.5
//! output = out/beta.csv
//! ```
//!
//! Exactly one section, named after the experiment. Every key is optional
//! except `output`; unknown keys are errors. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    SpinspinBloch,
    SpinspinConcurrence,
    DephasingJx,
    CorrmeJx,
    CorrmeJx2,
    ProbeSweep,
    FcsWorkdist,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::SpinspinBloch,
        Self::SpinspinConcurrence,
        Self::DephasingJx,
        Self::CorrmeJx,
        Self::CorrmeJx2,
        Self::ProbeSweep,
        Self::FcsWorkdist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SpinspinBloch => "spinspin_bloch",
            Self::SpinspinConcurrence => "spinspin_concurrence",
            Self::DephasingJx => "dephasing_jx",
            Self::CorrmeJx => "corrme_jx",
            Self::CorrmeJx2 => "corrme_jx2",
            Self::ProbeSweep => "probe_sweep",
            Self::FcsWorkdist => "fcs_workdist",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment '{s}' (expected one of {})", names.join(", "))
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every problem found in a configuration, one message per offending key
/// or line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError(pub Vec<String>);

impl fmt::Display for ValidationError {
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

impl std::error::Error for ValidationError {}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// A parsed file: the experiment and its raw key-value map.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub entries: BTreeMap<String, Entry>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ValidationError> {
        let mut errors = Vec::new();
        let mut experiment = None;
        let mut sections = 0;
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                sections += 1;
                let Some(name) = rest.strip_suffix(']') else {
                    errors.push(format!("line {line_no}: malformed section header '{line}'"));
                    continue;
                };
                if sections > 1 {
                    errors.push(format!("line {line_no}: only one experiment section is allowed"));
                    continue;
                }
                match name.trim().parse::<Experiment>() {
                    Ok(e) => experiment = Some(e),
                    Err(e) => errors.push(format!("line {line_no}: {e}")),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {line_no}: expected 'key = value', got '{line}'"));
                continue;
            };
            let key = key.trim();
            if sections == 0 {
                errors.push(format!("line {line_no}: key '{key}' appears before the experiment section"));
                continue;
            }
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                errors.push(format!("line {line_no}: invalid key '{key}'"));
                continue;
            }
            let entry = Entry { value: value.trim().to_string(), line: line_no };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                errors.push(format!("line {line_no}: key '{key}' repeats line {}", prev.line));
            }
        }
        if sections == 0 {
            errors.push("no experiment section (e.g. '[corrme_jx]')".into());
        }
        match (experiment, errors.is_empty()) {
            (Some(experiment), true) => Ok(Self { experiment, entries }),
            _ => Err(ValidationError(errors)),
        }
    }
}

/// Typed, error-accumulating view of the key-value map. Every getter records
/// the resolved value so the run can write back a complete configuration.
pub struct Params<'a> {
    cfg: &'a ExperimentConfig,
    used: Vec<&'static str>,
    resolved: Vec<(&'static str, String)>,
    errors: Vec<String>,
}

impl<'a> Params<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Self { cfg, used: Vec::new(), resolved: Vec::new(), errors: Vec::new() }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Entry> {
        self.used.push(key);
        self.cfg.entries.get(key)
    }

    pub fn error(&mut self, key: &str, msg: impl fmt::Display) {
        let at = self.cfg.entries.get(key).map(|e| format!(" (line {})", e.line)).unwrap_or_default();
        self.errors.push(format!("{key}{at}: {msg}"));
    }

    fn parsed<T: FromStr + fmt::Display + Clone>(&mut self, key: &'static str, default: Option<T>, what: &str) -> Option<T> {
        let v = match self.raw(key) {
            Some(e) => match e.value.parse::<T>() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.error(key, format!("expected {what}, got '{}'", e.value));
                    return None;
                }
            },
            None if default.is_none() => {
                self.error(key, "required key is missing");
                return None;
            }
            None => default,
        };
        if let Some(v) = &v {
            self.resolved.push((key, v.to_string()));
        }
        v
    }

    /// Float; `inf` is accepted (e.g. β at zero temperature).
    pub fn f64(&mut self, key: &'static str, default: f64) -> f64 {
        match self.parsed::<f64>(key, Some(default), "a number") {
            Some(v) if v.is_nan() => {
                self.error(key, "NaN is not a valid value");
                default
            }
            Some(v) => v,
            None => default,
        }
    }

    pub fn usize(&mut self, key: &'static str, default: usize) -> usize {
        self.parsed::<usize>(key, Some(default), "a non-negative integer").unwrap_or(default)
    }

    pub fn u64(&mut self, key: &'static str, default: u64) -> u64 {
        self.parsed::<u64>(key, Some(default), "a non-negative integer").unwrap_or(default)
    }

    pub fn bool(&mut self, key: &'static str, default: bool) -> bool {
        self.parsed::<bool>(key, Some(default), "true or false").unwrap_or(default)
    }

    pub fn string(&mut self, key: &'static str) -> String {
        self.parsed::<String>(key, None, "text").unwrap_or_default()
    }

    /// One of `choices`, by name.
    pub fn choice<T: Copy>(&mut self, key: &'static str, default: T, choices: &[(&'static str, T)]) -> T
    where
        T: PartialEq,
    {
        let name = match self.raw(key) {
            Some(e) => e.value.as_str(),
            None => choices.iter().find(|(_, v)| *v == default).map(|(n, _)| *n).expect("default is a choice"),
        };
        match choices.iter().find(|(n, _)| *n == name) {
            Some(&(n, v)) => {
                self.resolved.push((key, n.to_string()));
                v
            }
            None => {
                let names: Vec<_> = choices.iter().map(|(n, _)| *n).collect();
                self.error(key, format!("expected one of {}, got '{name}'", names.join(", ")));
                default
            }
        }
    }

    /// Comma-separated floats; an empty value is an empty list.
    pub fn f64_list(&mut self, key: &'static str, default: &[f64]) -> Vec<f64> {
        let v = match self.raw(key) {
            None => default.to_vec(),
            Some(e) if e.value.is_empty() => Vec::new(),
            Some(e) => {
                let parsed: Result<Vec<f64>, _> = e.value.split(',').map(|x| x.trim().parse::<f64>()).collect();
                match parsed {
                    Ok(v) if v.iter().all(|x| !x.is_nan()) => v,
                    _ => {
                        let msg = format!("expected comma-separated numbers, got '{}'", e.value);
                        self.error(key, msg);
                        return default.to_vec();
                    }
                }
            }
        };
        let text: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        self.resolved.push((key, text.join(", ")));
        v
    }

    /// All accumulated errors, plus one per key that no getter asked for.
    pub fn finish(mut self) -> Result<Resolved, ValidationError> {
        for (key, e) in &self.cfg.entries {
            if !self.used.contains(&key.as_str()) {
                self.errors.push(format!("{key} (line {}): unknown key for experiment {}", e.line, self.cfg.experiment));
            }
        }
        if self.errors.is_empty() {
            Ok(Resolved { experiment: self.cfg.experiment, entries: self.resolved })
        } else {
            self.errors.sort();
            self.errors.dedup();
            Err(ValidationError(self.errors))
        }
    }
}

/// Fully resolved configuration, in the order the keys were read.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub experiment: Experiment,
    pub entries: Vec<(&'static str, String)>,
}

impl Resolved {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str())
    }

    /// Re-parseable text of the configuration.
    pub fn to_text(&self) -> String {
        let mut s = format!("[{}]\n", self.experiment);
        for (k, v) in &self.entries {
            if v.is_empty() {
                s.push_str(&format!("{k} =\n"));
            } else {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }
}
