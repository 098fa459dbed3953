//! Report assembly. Every report starts with a reproducibility header.

use serde::Serialize;
use serde_json::Value;

use crate::scenario::Format;

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl Header {
    fn line(&self) -> String {
        let mut s = format!("# {} {} {}", self.tool, self.version, self.command);
        match self.length {
            Some(l) => s.push_str(&format!(" L={l}")),
            None => s.push_str(" L=none"),
        }
        s.push_str(&format!(" tol={:e} seed={}", self.tol, self.seed));
        if let Some(g) = self.grid {
            s.push_str(&format!(" grid={g}"));
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Result of one command in all three output forms. `passed` is false when
/// a check or audit fails.
#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub text: Vec<String>,
    pub table: Table,
    pub passed: bool,
}

impl Report {
    pub fn render(&self, header: &Header, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Json => {
                let doc = serde_json::json!({ "header": header, "result": self.json });
                out.push_str(&serde_json::to_string_pretty(&doc).expect("report serializes"));
                out.push('\n');
            }
            Format::Text => {
                out.push_str(&header.line());
                out.push('\n');
                for l in &self.text {
                    out.push_str(l);
                    out.push('\n');
                }
            }
            Format::Csv => {
                out.push_str(&header.line());
                out.push('\n');
                out.push_str(&self.table.columns.join(","));
                out.push('\n');
                for r in &self.table.rows {
                    let cells: Vec<String> = r.iter().map(|c| csv_field(c)).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Shortest round-trip form, scientific for very small or large values.
pub fn fmt_f(x: f64) -> String {
    format!("{:?}", x + 0.0)
}

pub fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(";")
}
