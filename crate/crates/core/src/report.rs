//! Experiment reports and their CSV/JSON serialization.
//!
//! Floats are written with 17 significant digits, rationals as `"num/den"`
//! strings. Maps are `BTreeMap`s so keys always come out sorted, and the wall
//! clock duration is kept out of the serialized form so reruns are
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Usage(format!("unknown format {other:?}; expected csv or json"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub params: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
    #[serde(skip)]
    pub duration: Option<Duration>,
}

impl PartialEq for Report {
    fn eq(&self, o: &Self) -> bool {
        self.experiment == o.experiment
            && self.params == o.params
            && self.metrics == o.metrics
            && self.verdicts == o.verdicts
            && self.table == o.table
    }
}

/// `v` with 17 significant digits; non-finite values become `"inf"`, `"-inf"`, `"nan"`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn format_rational(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

fn float_value(v: f64) -> Value {
    let s = format_float(v);
    if v.is_finite() {
        // With arbitrary precision enabled the number keeps this exact spelling.
        serde_json::from_str(&s).expect("formatted float is valid JSON")
    } else {
        Value::String(s)
    }
}

impl Report {
    pub fn new(experiment: &str, params: BTreeMap<String, String>) -> Self {
        Self {
            experiment: experiment.into(),
            params,
            metrics: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            table: None,
            duration: None,
        }
    }

    pub fn float(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.into(), float_value(v));
    }

    pub fn rational(&mut self, key: &str, q: &BigRational) {
        self.metrics.insert(key.into(), Value::String(format_rational(q)));
    }

    pub fn int(&mut self, key: &str, v: u64) {
        self.metrics.insert(key.into(), Value::from(v));
    }

    pub fn text(&mut self, key: &str, v: impl Into<String>) {
        self.metrics.insert(key.into(), Value::String(v.into()));
    }

    pub fn verdict(&mut self, key: &str, pass: bool) {
        self.verdicts.insert(key.into(), pass);
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|(_, &v)| !v).map(|(k, _)| k.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("malformed report: {e}")))
    }

    /// The table if there is one, otherwise `kind,key,value` rows of metrics and verdicts.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        match &self.table {
            Some(t) => {
                w.write_record(&t.header).map_err(io)?;
                for r in &t.rows {
                    w.write_record(r).map_err(io)?;
                }
            }
            None => {
                w.write_record(["kind", "key", "value"]).map_err(io)?;
                for (k, v) in &self.metrics {
                    let text = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    w.write_record(["metric", k.as_str(), text.as_str()]).map_err(io)?;
                }
                for (k, v) in &self.verdicts {
                    w.write_record(["verdict", k.as_str(), if *v { "pass" } else { "fail" }]).map_err(io)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn emit(&self, format: Format, path: &Path) -> Result<()> {
        std::fs::write(path, self.render(format)?)?;
        Ok(())
    }
}
