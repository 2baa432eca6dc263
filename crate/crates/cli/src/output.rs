use std::fs;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A flat table with a fixed header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(x) => x.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(x) => Value::from(*x),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }

    fn from_json(v: &Value) -> Cell {
        match v {
            Value::Null => Cell::Empty,
            Value::Bool(b) => Cell::Bool(*b),
            Value::Number(n) => n
                .as_i64()
                .map_or_else(|| Cell::Num(n.as_f64().unwrap_or(f64::NAN)), Cell::Int),
            Value::String(s) => Cell::Text(s.clone()),
            other => Cell::Text(other.to_string()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// One row from a JSON object, nested keys joined with `.` and array
    /// entries suffixed with their index.
    pub fn from_object(v: &Value) -> Self {
        let mut header = Vec::new();
        let mut row = Vec::new();
        flatten("", v, &mut header, &mut row);
        Table {
            header,
            rows: vec![row],
        }
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .cloned()
                    .zip(r.iter().map(Cell::to_json))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }
}

fn flatten(prefix: &str, v: &Value, header: &mut Vec<String>, row: &mut Vec<Cell>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, header, row);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, header, row);
            }
        }
        scalar => {
            header.push(prefix.to_string());
            row.push(Cell::from_json(scalar));
        }
    }
}

/// What a command produced: a JSON document and its CSV rendering.
pub struct Report {
    pub json: Value,
    pub table: Table,
}

impl Report {
    pub fn render(&self, format: Format) -> io::Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(&self.json)?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => self.table.to_csv(),
        }
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> io::Result<()> {
        let bytes = self.render(format)?;
        match out {
            Some(path) => fs::write(path, bytes),
            None => io::stdout().lock().write_all(&bytes),
        }
    }
}
