//! Sweep output tables and their CSV form.
//!
//! Floats are written with 17 significant digits so a parsed file reproduces
//! every value bit for bit. Integers never carry an exponent, which keeps the
//! two apart when reading back.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn parse(field: &str) -> Self {
        if field.is_empty() {
            return Value::Missing;
        }
        let integer_like = field.bytes().all(|b| b.is_ascii_digit() || b == b'-');
        if integer_like {
            if let Ok(i) = field.parse() {
                return Value::Int(i);
            }
        }
        match field.parse::<f64>() {
            Ok(x) => Value::Float(x),
            Err(_) => Value::Text(field.to_owned()),
        }
    }

    /// Bitwise equality for floats, so `NaN` rows compare equal after a round trip.
    pub fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
            _ => self == other,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(x) if x.is_finite() => write!(f, "{x:.16e}"),
            Value::Float(x) if x.is_nan() => f.write_str("NaN"),
            Value::Float(x) => f.write_str(if *x > 0.0 { "inf" } else { "-inf" }),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => f.write_str(s),
            Value::Missing => Ok(()),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<Option<f64>> for Value {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Value::Missing, Value::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric view of one column; text and empty cells become `None`.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn same(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y)))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut table = Table::new(columns);
        for record in r.records() {
            let record = record?;
            table.rows.push(record.iter().map(Value::parse).collect());
        }
        Ok(table)
    }

    /// Writes to `path`, naming the path in any error.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| e.at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(|e| e.at(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only() {
        let t = Table::new(vec!["a".into(), "b".into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a,b\n");
        assert!(Table::read_csv(&buf[..]).unwrap().same(&t));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(Value::Float(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(Value::Float(-2.5).to_string(), "-2.5000000000000000e0");
        assert_eq!(Value::Int(-3).to_string(), "-3");
    }

    #[test]
    fn mixed_round_trip() {
        let mut t = Table::new(vec!["x".into(), "n".into(), "error".into(), "gap".into()]);
        t.push(vec![1.0.into(), 3usize.into(), Value::Missing, f64::NAN.into()]);
        t.push(vec![
            (1.0 / 3.0).into(),
            Value::Int(0),
            Value::Text("singular matrix, level 3".into()),
            f64::NEG_INFINITY.into(),
        ]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Table::read_csv(&buf[..]).unwrap();
        assert!(back.same(&t), "{back:?}");
        assert_eq!(back.column("x").unwrap()[1], Some(1.0 / 3.0));
    }

    #[test]
    fn io_errors_name_the_path() {
        let e = Table::load(Path::new("/nonexistent/dir/x.csv")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/dir/x.csv"));
    }
}
