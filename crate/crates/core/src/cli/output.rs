//! Tabular output: CSV with `#` metadata lines, or NDJSON with a `meta`
//! record. Numbers use the shortest representation that parses back exactly.

use std::io::{self, Write};

use serde_json::{Map, Value};

use super::config::Format;

/// Shortest round-trip decimal; exponent form outside [1e-4, 1e15).
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// A scalar in a metadata or summary block.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    UInt(u64),
    Text(String),
    Bool(bool),
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Num(x) => format_number(*x),
            Field::Int(i) => i.to_string(),
            Field::UInt(i) => i.to_string(),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Num(x) => json_number(*x),
            Field::Int(i) => Value::from(*i),
            Field::UInt(i) => Value::from(*i),
            Field::Text(s) => Value::from(s.as_str()),
            Field::Bool(b) => Value::from(*b),
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}

impl From<usize> for Field {
    fn from(x: usize) -> Self {
        Field::Int(x as i64)
    }
}

impl From<u64> for Field {
    fn from(x: u64) -> Self {
        Field::UInt(x)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.into())
    }
}

impl From<String> for Field {
    fn from(s: String) -> Self {
        Field::Text(s)
    }
}

impl From<bool> for Field {
    fn from(b: bool) -> Self {
        Field::Bool(b)
    }
}

/// One output document: metadata, a numeric table, and trailing summary
/// blocks (each a named list of fields).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub command: String,
    pub meta: Vec<(String, Field)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub blocks: Vec<(String, Vec<(String, Field)>)>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self { command: command.into(), columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Into<Field>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn row(&mut self, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    pub fn block(&mut self, name: &str, fields: Vec<(String, Field)>) {
        self.blocks.push((name.into(), fields));
    }

    pub fn write(&self, format: Format, out: &mut impl Write) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Ndjson => self.write_ndjson(out),
        }
    }

    fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# command = {}", self.command)?;
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {}", v.csv())?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        for (name, fields) in &self.blocks {
            for (k, v) in fields {
                writeln!(out, "# {name}.{k} = {}", v.csv())?;
            }
        }
        Ok(())
    }

    fn write_ndjson(&self, out: &mut impl Write) -> io::Result<()> {
        let mut meta = Map::new();
        meta.insert("type".into(), "meta".into());
        meta.insert("command".into(), self.command.as_str().into());
        for (k, v) in &self.meta {
            meta.insert(k.clone(), v.json());
        }
        writeln!(out, "{}", Value::Object(meta))?;
        for row in &self.rows {
            let mut rec = Map::new();
            rec.insert("type".into(), "row".into());
            for (c, &x) in self.columns.iter().zip(row) {
                rec.insert(c.clone(), json_number(x));
            }
            writeln!(out, "{}", Value::Object(rec))?;
        }
        for (name, fields) in &self.blocks {
            let mut rec = Map::new();
            rec.insert("type".into(), name.as_str().into());
            for (k, v) in fields {
                rec.insert(k.clone(), v.json());
            }
            writeln!(out, "{}", Value::Object(rec))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn numbers_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_number(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_layout() {
        let mut r = Report::new("demo", &["a", "b"]);
        r.meta("seed", 3usize);
        r.row(vec![1.5, f64::NAN]);
        r.block("fit", vec![("slope".into(), Field::Num(-2e-7))]);
        let mut buf = Vec::new();
        r.write(Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# command = demo\n# seed = 3\na,b\n1.5,NaN\n# fit.slope = -2e-7\n");
    }

    #[test]
    fn ndjson_marks_nan_as_null() {
        let mut r = Report::new("demo", &["a", "b"]);
        r.row(vec![0.1, f64::NAN]);
        let mut buf = Vec::new();
        r.write(Format::Ndjson, &mut buf).unwrap();
        let lines: Vec<Value> =
            String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["type"], "meta");
        assert_eq!(lines[1]["a"], 0.1);
        assert!(lines[1]["b"].is_null());
    }
}
