use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    /// Floats use 17 significant digits so they parse back to the same value.
    fn to_csv(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Float(x) => json!(x),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }
}

/// Provenance written at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub threads: Option<usize>,
    pub duration_s: f64,
    pub config: Value,
}

pub fn write_csv<W: Write>(mut w: W, manifest: &Manifest, table: &Table) -> Result<(), CliError> {
    writeln!(w, "# command: {}", manifest.command)?;
    writeln!(w, "# version: {}", manifest.version)?;
    if let Some(seed) = manifest.seed {
        writeln!(w, "# seed: {seed}")?;
    }
    if let Some(rng) = &manifest.rng {
        writeln!(w, "# rng: {rng}")?;
    }
    if let Some(t) = manifest.threads {
        writeln!(w, "# threads: {t}")?;
    }
    writeln!(w, "# duration_s: {:.3}", manifest.duration_s)?;
    writeln!(w, "# config: {}", serde_json::to_string(&manifest.config)?)?;
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    csv.write_record(&table.columns)?;
    for row in &table.rows {
        csv.write_record(row.iter().map(Cell::to_csv))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut w: W, manifest: &Manifest, table: &Table) -> Result<(), CliError> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.to_string(), v.to_json()))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let doc = json!({ "manifest": manifest, "columns": table.columns, "rows": rows });
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    Ok(())
}

/// Drops the manifest (lines starting with `#`) from a CSV document.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest {
            command: "x".into(),
            version: "0".into(),
            seed: Some(3),
            rng: None,
            threads: None,
            duration_s: 0.5,
            config: json!({"a": 1}),
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![0.1.into(), 7usize.into(), "y1".into()]);
        let mut buf = Vec::new();
        write_csv(&mut buf, &manifest(), &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# command: x\n"));
        assert!(text.contains("# seed: 3\n"));
        assert_eq!(csv_body(&text), "a,b,c\n1.0000000000000001e-1,7,y1\n");
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn json_layout() {
        let mut t = Table::new(&["a"]);
        t.push(vec![2.5.into()]);
        let mut buf = Vec::new();
        write_json(&mut buf, &manifest(), &t).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["rows"][0]["a"], json!(2.5));
        assert_eq!(v["manifest"]["command"], json!("x"));
    }
}
