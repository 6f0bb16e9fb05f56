use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Rounds to `digits` decimals, ties to even. Ties are judged on the exact binary value, which
/// is what the standard formatter does.
pub fn round_half_even(x: f64, digits: usize) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.digits$}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self, precision: Option<usize>) -> String {
        match self {
            Cell::Num(x) => match precision {
                Some(d) => format!("{:.d$}", round_half_even(*x, d)),
                None => format!("{x}"),
            },
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn rounded(&self, precision: Option<usize>) -> Cell {
        match (self, precision) {
            (Cell::Num(x), Some(d)) => Cell::Num(round_half_even(*x, d)),
            _ => self.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// A rectangular result with a fixed header. `meta` carries scalar annotations; in CSV they are
/// written as leading `# key: value` lines.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        self.column(name).and_then(|c| self.rows.get(row)?.get(c)?.as_f64())
    }

    pub fn rounded(&self, precision: Option<usize>) -> Table {
        Table {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|c| c.rounded(precision)).collect())
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn to_csv(&self, precision: Option<usize>) -> CliResult<String> {
        let mut buf = Vec::new();
        for (k, v) in &self.meta {
            writeln!(buf, "# {k}: {v}").map_err(|e| CliError::Write(e.to_string()))?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|c| c.render(precision)))?;
            }
            w.flush().map_err(|e| CliError::Write(e.to_string()))?;
        }
        String::from_utf8(buf).map_err(|e| CliError::Write(e.to_string()))
    }
}

/// Rounds every number in a JSON tree.
pub fn round_json(value: &mut serde_json::Value, digits: usize) {
    use serde_json::Value;
    match value {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if n.is_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_half_even(x, digits)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| round_json(v, digits)),
        Value::Object(map) => map.values_mut().for_each(|v| round_json(v, digits)),
        _ => {}
    }
}

/// Where and how a command writes its result.
#[derive(Debug, Clone, Default)]
pub struct Sink {
    pub format: Format,
    pub out: Option<PathBuf>,
    pub precision: Option<usize>,
}

impl Sink {
    pub fn emit_text(&self, text: &str) -> CliResult<()> {
        write_text(self.out.as_deref(), text)
    }

    pub fn render_json<T: Serialize>(&self, value: &T) -> CliResult<String> {
        let mut v = serde_json::to_value(value).map_err(|e| CliError::Write(e.to_string()))?;
        if let Some(d) = self.precision {
            round_json(&mut v, d);
        }
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Write(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn render_table(&self, table: &Table) -> CliResult<String> {
        match self.format {
            Format::Csv => table.to_csv(self.precision),
            Format::Json => self.render_json(&table.rounded(self.precision)),
        }
    }

    /// JSON gets the domain value itself, CSV gets its tabular view.
    pub fn emit<T: Serialize>(&self, value: &T, table: impl FnOnce() -> Table) -> CliResult<()> {
        let text = match self.format {
            Format::Json => self.render_json(value)?,
            Format::Csv => table().to_csv(self.precision)?,
        };
        self.emit_text(&text)
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
