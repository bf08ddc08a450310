//! Report envelope shared by the verification subcommands.
//!
//! The JSON carries no timestamps or host data, so identical invocations
//! produce identical bytes.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use maplab::io;
use maplab::Result;

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows }
    }

    fn render(&self) -> String {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        io::csv_string(&header, &self.rows)
    }
}

/// Missing values are written as NaN.
pub fn csv_cell(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub struct Report {
    pub verdict: bool,
    doc: Map<String, Value>,
    csv: Option<Table>,
}

impl Report {
    pub fn new(
        command: &str,
        verdict: bool,
        spec_hash: String,
        seeds: &[u64],
        config: &impl Serialize,
        records: Vec<Value>,
        summary: Value,
    ) -> Result<Self> {
        let mut doc = Map::new();
        doc.insert("command".into(), command.into());
        doc.insert("verdict".into(), verdict.into());
        doc.insert("spec_hash".into(), spec_hash.into());
        doc.insert("seeds".into(), serde_json::to_value(seeds)?);
        doc.insert("config".into(), serde_json::to_value(config)?);
        doc.insert("records".into(), Value::Array(records));
        doc.insert("summary".into(), summary);
        Ok(Self { verdict, doc, csv: None })
    }

    /// Splits a library report into `verdict`, `records` and the remaining
    /// summary fields.
    pub fn from_value(
        command: &str,
        spec_hash: String,
        seeds: &[u64],
        config: &impl Serialize,
        report: &impl Serialize,
        csv: Option<Table>,
    ) -> Result<Self> {
        let Value::Object(mut fields) = serde_json::to_value(report)? else {
            unreachable!("library reports serialize to objects")
        };
        let verdict = fields.remove("verdict").and_then(|v| v.as_bool()).unwrap_or(false);
        let records = match fields.remove("records") {
            Some(Value::Array(r)) => r,
            _ => Vec::new(),
        };
        let mut out = Self::new(command, verdict, spec_hash, seeds, config, records, Value::Object(fields))?;
        out.csv = csv;
        Ok(out)
    }

    pub fn with_csv(mut self, csv: Table) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.doc.insert(key.into(), value);
    }

    pub fn write(&self, json: Option<&Path>, csv: Option<&Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.doc)?;
        text.push('\n');
        match json {
            Some(p) => io::write_atomic(p, text.as_bytes())?,
            None => print!("{text}"),
        }
        if let Some(p) = csv {
            let table = self.csv.as_ref().map(Table::render).unwrap_or_default();
            io::write_atomic(p, table.as_bytes())?;
        }
        Ok(())
    }
}
