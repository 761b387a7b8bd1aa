//! Ordered name/value records printed as `key=value` lines, a JSON object
//! or `name,value` CSV.

use std::io::{self, Write};

use serde_json::{Map, Number, Value};

#[derive(Debug, Default)]
pub struct Record {
    fields: Vec<(String, Value)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        let v = Number::from_f64(value).map(Value::Number).unwrap_or_else(|| Value::String(value.to_string()));
        self.fields.push((key.to_owned(), v));
        self
    }

    pub fn int(&mut self, key: &str, value: u64) -> &mut Self {
        self.fields.push((key.to_owned(), Value::from(value)));
        self
    }

    pub fn text(&mut self, key: &str, value: &str) -> &mut Self {
        self.fields.push((key.to_owned(), Value::String(value.to_owned())));
        self
    }

    fn plain(value: &Value) -> String {
        match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }

    pub fn print_kv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, v) in &self.fields {
            writeln!(out, "{k}={}", Self::plain(v))?;
        }
        Ok(())
    }

    pub fn print_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        let map: Map<String, Value> = self.fields.iter().cloned().collect();
        writeln!(out, "{}", Value::Object(map))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "name,value")?;
        for (k, v) in &self.fields {
            writeln!(out, "{k},{}", Self::plain(v))?;
        }
        out.flush()
    }
}
