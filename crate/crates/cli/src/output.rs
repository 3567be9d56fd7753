//! CSV/JSON emission with a commented metadata header.

use std::io::{self, Write};

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A command result: named columns plus scalar summary fields.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Map<String, Value>,
    /// Single-row results print as a JSON object rather than a list.
    pub single: bool,
}

impl Report {
    pub fn table(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn record<S: Into<String>>(fields: Vec<(S, Value)>) -> Self {
        let (columns, row): (Vec<String>, Vec<Value>) = fields.into_iter().map(|(c, v)| (c.into(), v)).unzip();
        Self {
            columns,
            rows: vec![row],
            summary: Map::new(),
            single: true,
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    fn row_object(&self, row: &[Value]) -> Value {
        Value::Object(
            self.columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.clone(), v.clone()))
                .collect(),
        )
    }
}

fn csv_field(v: &Value) -> String {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

pub fn write_report(out: &mut dyn Write, meta: &Value, report: &Report, format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            if let Value::Object(m) = meta {
                for (k, v) in m {
                    writeln!(out, "# {k}: {v}")?;
                }
            }
            for (k, v) in &report.summary {
                writeln!(out, "# {k}: {v}")?;
            }
            writeln!(out, "{}", report.columns.join(","))?;
            for row in &report.rows {
                let fields: Vec<String> = row.iter().map(csv_field).collect();
                writeln!(out, "{}", fields.join(","))?;
            }
        }
        Format::Json => {
            let mut top = Map::new();
            top.insert("meta".into(), meta.clone());
            if !report.summary.is_empty() {
                top.insert("summary".into(), Value::Object(report.summary.clone()));
            }
            if report.single && report.rows.len() == 1 {
                top.insert("result".into(), report.row_object(&report.rows[0]));
            } else {
                top.insert(
                    "rows".into(),
                    Value::Array(report.rows.iter().map(|r| report.row_object(r)).collect()),
                );
            }
            serde_json::to_writer_pretty(&mut *out, &Value::Object(top))?;
            writeln!(out)?;
        }
    }
    Ok(())
}
