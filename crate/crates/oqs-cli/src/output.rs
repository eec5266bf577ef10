//! Result tables and their on-disk form.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use oqs::qcore::StateAudit;

use crate::config::Resolved;

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: Vec<f64>,
    /// Written without exponent (counts, flags).
    pub integer: bool,
}

impl Column {
    pub fn new(name: impl Into<String>, data: Vec<f64>) -> Self {
        Self { name: name.into(), data, integer: false }
    }

    pub fn integer(name: impl Into<String>, data: Vec<f64>) -> Self {
        Self { name: name.into(), data, integer: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<Column>,
}

impl ResultTable {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.data.as_slice())
    }

    /// Equal lengths and finite cells.
    pub fn check(&self) -> Result<(), String> {
        let n = self.rows();
        for c in &self.columns {
            if c.data.len() != n {
                return Err(format!("column '{}' has {} rows, expected {n}", c.name, c.data.len()));
            }
            if let Some(i) = c.data.iter().position(|x| !x.is_finite()) {
                return Err(format!("column '{}' row {i} is {}", c.name, c.data[i]));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        s.push_str(&names.join(","));
        s.push('\n');
        for i in 0..self.rows() {
            for (j, c) in self.columns.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&format_cell(c.data[i], c.integer));
            }
            s.push('\n');
        }
        s
    }
}

/// 17 significant digits in scientific notation; integers verbatim.
pub fn format_cell(x: f64, integer: bool) -> String {
    if integer && x.fract() == 0.0 && x.abs() < 9.0e15 {
        format!("{}", x as i64)
    } else {
        // −0 prints as 0 so that sign-of-zero noise never changes the bytes
        let x = if x == 0.0 { 0.0 } else { x };
        format!("{x:.16e}")
    }
}

/// Everything a run produced besides the table.
#[derive(Clone, Debug, Default)]
pub struct RunInfo {
    pub audit: StateAudit,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub resolved: Resolved,
    pub table: ResultTable,
    pub info: RunInfo,
    pub seconds: f64,
}

/// Paths of the three files belonging to one run.
pub fn sidecar_paths(csv: &Path) -> (PathBuf, PathBuf) {
    let mut meta = csv.as_os_str().to_owned();
    meta.push(".meta.txt");
    let mut conf = csv.as_os_str().to_owned();
    conf.push(".resolved.conf");
    (PathBuf::from(meta), PathBuf::from(conf))
}

/// temp file + rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn metadata(out: &RunOutput) -> String {
    let a = &out.info.audit;
    let mut s = String::new();
    s.push_str(&format!("experiment: {}\n", out.resolved.experiment));
    s.push_str(&format!("code_version: oqs {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("rows: {}\n", out.table.rows()));
    let names: Vec<&str> = out.table.columns.iter().map(|c| c.name.as_str()).collect();
    s.push_str(&format!("columns: {}\n", names.join(",")));
    s.push_str(&format!("runtime_seconds: {:.3}\n", out.seconds));
    s.push_str("tolerances:\n");
    s.push_str("  state_trace: 1e-9\n  state_hermiticity: 1e-9\n  state_positivity: -1e-7\n");
    s.push_str("state_audit:\n");
    s.push_str(&format!("  states_checked: {}\n", a.count));
    s.push_str(&format!("  max_trace_error: {:e}\n", a.max_trace_error));
    s.push_str(&format!("  max_hermiticity_error: {:e}\n", a.max_hermiticity_error));
    s.push_str(&format!("  min_eigenvalue: {:e}\n", a.min_eigenvalue));
    s.push_str(&format!("  passes: {}\n", a.passes()));
    if !out.info.notes.is_empty() {
        s.push_str("notes:\n");
        for n in &out.info.notes {
            s.push_str(&format!("  - {n}\n"));
        }
    }
    s.push_str("resolved_config:\n");
    for line in out.resolved.to_text().lines() {
        s.push_str(&format!("  {line}\n"));
    }
    s
}

/// CSV, metadata sidecar and resolved configuration.
pub fn persist(out: &RunOutput, csv: &Path) -> std::io::Result<()> {
    let (meta, conf) = sidecar_paths(csv);
    write_atomic(csv, &out.table.to_csv())?;
    write_atomic(&meta, &metadata(out))?;
    write_atomic(&conf, &out.resolved.to_text())
}
