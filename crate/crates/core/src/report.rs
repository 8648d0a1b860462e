//! Report rendering shared by the CLI and the acceptance harness.
//!
//! Every report embeds the tool version and the resolved configuration. Floating point
//! values are rounded to ten significant digits; infinities are spelled `inf` / `-inf`.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Number, Value};

use crate::error::Result;

pub const TOOL: &str = "momineq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rounds to ten significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

pub fn fmt_num(x: f64) -> String {
    match x {
        f64::INFINITY => "inf".into(),
        f64::NEG_INFINITY => "-inf".into(),
        _ if x.is_nan() => "nan".into(),
        _ => round_sig(x).to_string(),
    }
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt_num(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

fn rounded(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(f64::NAN));
            Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, rounded(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// `{"tool", "version", "command", "config", "results"}` as pretty JSON.
pub fn render_json(command: &str, config: &impl Serialize, results: &impl Serialize) -> Result<String> {
    let mut root = Map::new();
    root.insert("tool".into(), Value::from(TOOL));
    root.insert("version".into(), Value::from(VERSION));
    root.insert("command".into(), Value::from(command));
    root.insert("config".into(), rounded(serde_json::to_value(config)?));
    root.insert("results".into(), rounded(serde_json::to_value(results)?));
    let mut text = serde_json::to_string_pretty(&Value::Object(root))?;
    text.push('\n');
    Ok(text)
}

/// CSV with `#`-prefixed preamble lines carrying the tool, version and config.
pub fn render_csv(command: &str, config: &impl Serialize, header: &[&str], rows: &[Vec<Cell>]) -> Result<String> {
    let config = serde_json::to_string(&rounded(serde_json::to_value(config)?))?;
    let mut out = format!("# {TOOL} {VERSION}\n# command: {command}\n# config: {config}\n");
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer.write_record(row.iter().map(Cell::render)).map_err(csv_error)?;
    }
    let body = writer.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

fn csv_error(e: csv::Error) -> crate::Error {
    std::io::Error::other(e.to_string()).into()
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_report(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

/// An extended real that serializes infinities as the strings `"inf"` and `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extended(pub f64);

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            f64::INFINITY => s.serialize_str("inf"),
            f64::NEG_INFINITY => s.serialize_str("-inf"),
            x => s.serialize_f64(x),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Extended(x)),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(Extended(f64::INFINITY)),
                "-inf" => Ok(Extended(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("not an extended real: {other:?}"))),
            },
        }
    }
}

/// `#[serde(with = ...)]` adapter for vectors of extended reals.
pub mod extended_vec {
    use super::Extended;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| Extended(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Extended>::deserialize(d)?.into_iter().map(|e| e.0).collect())
    }
}

/// `#[serde(with = ...)]` adapter for optional vectors of extended reals.
pub mod extended_vec_opt {
    use super::Extended;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|v| v.iter().map(|&x| Extended(x)).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Ok(Option::<Vec<Extended>>::deserialize(d)?.map(|v| v.into_iter().map(|e| e.0).collect()))
    }
}
