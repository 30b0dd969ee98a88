//! Experiment reports and their JSON / CSV serialization.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), non-finite
//! values as `null` in JSON and as `nan`/`inf` text in CSV. Key order is the
//! insertion order, so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Version of the report schema, written as `spec_version`.
pub const SCHEMA_VERSION: &str = "1.0";

/// Outcome of one asserted check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(id: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Criterion {
            id: id.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Row-per-sweep-point table, written as the companion CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Rows as JSON objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    for (c, v) in self.columns.iter().zip(r) {
                        m.insert(c.clone(), cell_json(v));
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Num(x) => num(*x),
        Cell::Int(i) => Value::from(*i),
        Cell::Text(s) => Value::from(s.clone()),
        Cell::Bool(b) => Value::from(*b),
    }
}

/// JSON number for a float; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Structured record of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub model: String,
    pub hurst: f64,
    pub grid_n: usize,
    pub seed: u64,
    /// Effective configuration, in canonical key order.
    pub config: Vec<(String, String)>,
    pub table: Table,
    pub summary: Map<String, Value>,
    pub provenance: Map<String, Value>,
    pub criteria: Vec<Criterion>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn failed_criteria(&self) -> impl Iterator<Item = &Criterion> {
        self.criteria.iter().filter(|c| !c.passed)
    }

    /// `{experiment}_{model}_{H}_{N}_{seed}`
    pub fn file_stem(&self) -> String {
        let raw = format!(
            "{}_{}_{}_{}_{}",
            self.experiment, self.model, self.hurst, self.grid_n, self.seed
        );
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '-' })
            .collect()
    }

    pub fn to_value(&self) -> Value {
        let mut root = Map::new();
        root.insert("spec_version".into(), Value::from(SCHEMA_VERSION));
        root.insert("experiment".into(), Value::from(self.experiment.clone()));
        root.insert("model".into(), Value::from(self.model.clone()));
        root.insert("hurst".into(), num(self.hurst));
        root.insert("grid_n".into(), Value::from(self.grid_n));
        let mut cfg = Map::new();
        for (k, v) in &self.config {
            cfg.insert(k.clone(), Value::from(v.clone()));
        }
        root.insert("config".into(), Value::Object(cfg));
        root.insert("seed".into(), Value::from(self.seed));
        root.insert("results".into(), self.table.to_json());
        root.insert("summary".into(), Value::Object(self.summary.clone()));
        root.insert(
            "criteria".into(),
            serde_json::to_value(&self.criteria).expect("criteria serialize"),
        );
        root.insert("passed".into(), Value::from(self.passed()));
        root.insert("provenance".into(), Value::Object(self.provenance.clone()));
        Value::Object(root)
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        write_json(&self.to_value(), 0, &mut out);
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Contract(format!("csv: {e}"));
        w.write_record(&self.table.columns).map_err(csv_err)?;
        for row in &self.table.rows {
            let rec: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => fmt_float(*x),
                    Cell::Int(i) => i.to_string(),
                    Cell::Text(s) => s.clone(),
                    Cell::Bool(b) => b.to_string(),
                })
                .collect();
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Contract(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Contract(format!("csv: {e}")))
    }
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize, out: &mut String| out.extend(std::iter::repeat_n(' ', 2 * n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_u64() || n.is_i64() {
                let _ = write!(out, "{n}");
            } else {
                let x = n.as_f64().unwrap_or(f64::NAN);
                if x.is_finite() {
                    out.push_str(&fmt_float(x));
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(indent + 1, out);
                write_json(item, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let n = map.len();
            for (i, (k, item)) in map.iter().enumerate() {
                pad(indent + 1, out);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_json(item, indent + 1, out);
                if i + 1 < n {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

/// Write `{stem}.json` and `{stem}.csv` into `dir` (created if missing).
pub fn write_report(report: &Report, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = report.file_stem();
    let json = dir.join(format!("{stem}.json"));
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&json, report.to_json()).map_err(|e| Error::io(&json, e))?;
    fs::write(&csv, report.to_csv()?).map_err(|e| Error::io(&csv, e))?;
    Ok((json, csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut table = Table::new(&["grid_n", "residual", "se", "jitter"]);
        table.push(vec![8usize.into(), 0.1.into(), f64::NAN.into(), 0.0.into()]);
        table.push(vec![16usize.into(), (1.0 / 3.0).into(), 1e-300.into(), 0.0.into()]);
        let mut summary = Map::new();
        summary.insert("decreasing".into(), Value::from(true));
        summary.insert("slope".into(), num(1.0));
        Report {
            experiment: "factorization".into(),
            model: "fbm".into(),
            hurst: 0.25,
            grid_n: 64,
            seed: 42,
            config: vec![("model".into(), "fbm".into()), ("hurst".into(), "0.25".into())],
            table,
            summary,
            provenance: Map::new(),
            criteria: vec![Criterion::new("monotone", true, "")],
        }
    }

    #[test]
    fn json_layout() {
        let r = sample();
        let s = r.to_json();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["spec_version"], SCHEMA_VERSION);
        assert_eq!(v["results"][0]["se"], Value::Null);
        assert_eq!(v["results"][1]["grid_n"], 16);
        assert!(s.contains("3.3333333333333331e-1"));
        assert!(s.contains("\"slope\": 1.0000000000000000e0"));
        assert_eq!(v["results"][1]["residual"].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(r.file_stem(), "factorization_fbm_0.25_64_42");
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("grid_n,residual,se,jitter"));
        assert_eq!(lines.next(), Some("8,1.0000000000000001e-1,nan,0.0000000000000000e0"));
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let (j, c) = write_report(&sample(), dir.path().join("out")).unwrap();
        assert!(j.ends_with("factorization_fbm_0.25_64_42.json"));
        assert!(c.exists());
        let again = dir.path().join("again");
        let (j2, _) = write_report(&sample(), &again).unwrap();
        assert_eq!(fs::read(j).unwrap(), fs::read(j2).unwrap());
    }
}
