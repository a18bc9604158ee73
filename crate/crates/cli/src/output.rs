use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// A rectangular table; cells are JSON numbers or strings (exact fractions).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = Value>>(&mut self, row: I) {
        let row: Vec<Value> = row.into_iter().collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Numeric value for a table cell; non-finite values become null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn int<T: Into<i128>>(x: T) -> Value {
    let x: i128 = x.into();
    Value::from(x as i64)
}

/// Everything an operation produces. Every scalar that is a numeric result
/// carries an entry in `bounds`: a certified error bound for exact
/// computations or one Monte Carlo standard deviation.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Output {
    pub scalars: BTreeMap<String, Value>,
    pub bounds: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub tables: BTreeMap<String, Table>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// the table printed as CSV by default
    #[serde(skip)]
    pub main_table: Option<String>,
    /// full structured report, printed instead of the record when present
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Value>,
}

impl Output {
    pub fn scalar(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.scalars.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    /// A numeric result with its bound.
    pub fn value(&mut self, key: &str, v: f64, bound: f64) -> &mut Self {
        self.scalars.insert(key.into(), num(v));
        self.bounds.insert(key.into(), bound);
        self
    }

    pub fn table(&mut self, key: &str, t: Table) -> &mut Self {
        if self.main_table.is_none() {
            self.main_table = Some(key.into());
        }
        self.tables.insert(key.into(), t);
        self
    }

    pub fn main(&self) -> Option<&Table> {
        self.main_table.as_ref().and_then(|k| self.tables.get(k))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// SHA-256 of the canonical JSON of the config
    pub inputs_hash: String,
    pub config: ExperimentConfig,
    pub outputs: Output,
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn inputs_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

/// Appends one JSON line under an exclusive lock, so concurrent invocations
/// never interleave records.
pub fn append_record(path: &Path, record: &ResultRecord) -> io::Result<()> {
    let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
    line.push(b'\n');
    let file: File = OpenOptions::new().create(true).append(true).open(path)?;
    file.lock()?;
    let res = (&file).write_all(&line).and_then(|_| (&file).flush());
    file.unlock()?;
    res
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_plain_decimal_and_newlines() {
        let mut t = Table::new(&["n", "p", "exact"]);
        t.push([int(3u8), num(0.375), Value::from("3/8")]);
        t.push([int(4u8), num(f64::NAN), Value::from("1/2")]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,p,exact\n3,0.375,3/8\n4,,1/2\n");
    }

    #[test]
    fn store_appends_whole_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let rec = ResultRecord {
            experiment: "series.wh".into(),
            started_unix_ms: 1,
            finished_unix_ms: 2,
            inputs_hash: inputs_hash(&ExperimentConfig::new("series.wh")),
            config: ExperimentConfig::new("series.wh"),
            outputs: Output::default(),
        };
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| append_record(&path, &rec).unwrap());
            }
        });
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 8);
        for line in text.lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["experiment"], "series.wh");
        }
    }

    #[test]
    fn hash_depends_on_inputs() {
        let a = ExperimentConfig::new("series.wh");
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(inputs_hash(&a), inputs_hash(&a.clone()));
        assert_ne!(inputs_hash(&a), inputs_hash(&b));
        assert_eq!(inputs_hash(&a).len(), 64);
    }
}
