//! Deterministic JSON and CSV emission. Floats are written with 17
//! significant digits; non-finite values become `null` in JSON and
//! `inf`/`-inf`/`NaN` in CSV.

use serde_json::{Number, Value};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "v1";

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn write_number(n: &Number, out: &mut String) {
    if n.is_f64() {
        out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
    } else {
        out.push_str(&n.to_string());
    }
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize, out: &mut String| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(x, indent, out);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(indent + 2, out);
                write_value(x, indent + 2, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                pad(indent + 2, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, indent + 2, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

pub fn to_json_string(v: &Value) -> String {
    let mut s = String::new();
    write_value(v, 0, &mut s);
    s.push('\n');
    s
}

pub fn to_value<T: serde::Serialize>(x: &T) -> CliResult<Value> {
    serde_json::to_value(x).map_err(|e| CliError::Output(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
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

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let err = |e: csv::Error| CliError::Output(e.to_string());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.headers).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }
}

/// Keys every command's `result` object must carry.
pub fn required_result_keys(command: &str) -> Option<&'static [&'static str]> {
    Some(match command {
        "rate" => &["rate_point"],
        "exponent" => &["records", "rates"],
        "hyptest" => &["report"],
        "resolve" | "decode" | "secrecy" => &["summary"],
        "lemma-la" => &["report", "family"],
        _ => return None,
    })
}

/// Checks an emitted summary against the v1 layout:
/// `{schema, command, seed, config, result}` with the command's result keys.
pub fn validate_summary(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("summary is not an object")?;
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    if keys != ["command", "config", "result", "schema", "seed"] {
        return Err(format!("unexpected top-level keys {keys:?}"));
    }
    if obj["schema"] != SCHEMA_VERSION {
        return Err(format!("schema is {}, expected {SCHEMA_VERSION}", obj["schema"]));
    }
    let cmd = obj["command"].as_str().ok_or("command is not a string")?;
    let need = required_result_keys(cmd).ok_or_else(|| format!("unknown command {cmd}"))?;
    if !obj["seed"].is_u64() {
        return Err("seed is not an unsigned integer".into());
    }
    if !obj["config"].is_object() {
        return Err("config is not an object".into());
    }
    let res = obj["result"].as_object().ok_or("result is not an object")?;
    for k in need {
        if !res.contains_key(*k) {
            return Err(format!("result lacks `{k}`"));
        }
    }
    if let Some(s) = res.get("summary") {
        for k in ["quantity", "trials", "empirical_mean", "std_error", "half_width", "analytic_bound", "pass"] {
            if s.get(k).is_none() {
                return Err(format!("summary lacks `{k}`"));
            }
        }
    }
    Ok(())
}
