//! Table output as CSV or JSON.
//!
//! CSV floats are written with 17 significant digits (`{:.16e}`); JSON
//! numbers use the shortest representation that parses back to the same
//! `f64`. Both round-trip exactly.

use std::io::Write;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Null,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json_float(*v),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Null => Value::Null,
        }
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Non-finite values become `null`.
pub fn json_float(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        w.flush()
    }

    pub fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Run description placed under `meta` in every JSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command: &'static str,
    pub params: Vec<(&'static str, Value)>,
    pub tolerances: Vec<(&'static str, f64)>,
}

impl Meta {
    pub fn to_json(&self) -> Value {
        let params: Map<String, Value> = self.params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        let tolerances: Map<String, Value> =
            self.tolerances.iter().map(|(k, v)| (k.to_string(), json_float(*v))).collect();
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "params": params,
            "tolerances": tolerances,
        })
    }
}

/// `{"meta": …, key: payload}` followed by a newline.
pub fn write_json<W: Write>(mut out: W, meta: &Meta, key: &str, payload: Value) -> std::io::Result<()> {
    let mut doc = Map::new();
    doc.insert("meta".into(), meta.to_json());
    doc.insert(key.into(), payload);
    serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
    out.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_floats() {
        let mut t = Table::new(vec!["x", "label", "n", "missing"]);
        let x = 0.1 + 0.2;
        t.push(vec![Cell::Num(x), Cell::Text("a, b".into()), Cell::Int(-3), Cell::Null]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,label,n,missing"));
        let row = lines.next().unwrap();
        let first = row.split(',').next().unwrap();
        assert_eq!(first.parse::<f64>().unwrap(), x);
        assert!(row.contains("\"a, b\""));
        assert!(row.ends_with(",-3,"));
    }

    #[test]
    fn json_document_shape() {
        let mut t = Table::new(vec!["v"]);
        t.push(vec![Cell::Num(f64::NAN)]);
        t.push(vec![Cell::Num(1.0 / 3.0)]);
        let meta = Meta { command: "test", params: vec![("gamma", json!(1.5))], tolerances: vec![("rel_tol", 1e-10)] };
        let mut buf = Vec::new();
        write_json(&mut buf, &meta, "rows", t.json_rows()).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["meta"]["command"], "test");
        assert_eq!(v["meta"]["tolerances"]["rel_tol"], 1e-10);
        assert!(v["rows"][0]["v"].is_null());
        assert_eq!(v["rows"][1]["v"].as_f64().unwrap(), 1.0 / 3.0);
    }
}
