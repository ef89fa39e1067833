//! CSV and JSON emission. Every document starts with the command name and the
//! resolved configuration; worker count and output path are left out so that
//! files do not depend on them.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A result table with provenance.
pub struct Document {
    pub command: &'static str,
    pub config: Map<String, Value>,
    pub metadata: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Document {
    pub fn new(command: &'static str, config: Map<String, Value>, columns: Vec<String>) -> Self {
        Self {
            command,
            config,
            metadata: Map::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.render_json(),
            Format::Csv => self.render_csv(),
        }
    }

    fn render_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.columns
                        .iter()
                        .cloned()
                        .zip(r.iter().cloned())
                        .collect(),
                )
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("command".into(), self.command.into());
        doc.insert("config".into(), Value::Object(self.config.clone()));
        doc.insert("metadata".into(), Value::Object(self.metadata.clone()));
        doc.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable");
        s.push('\n');
        s
    }

    fn render_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# command: {}\n", self.command));
        s.push_str(&format!(
            "# config: {}\n",
            serde_json::to_string(&self.config).expect("serializable")
        ));
        for (k, v) in &self.metadata {
            s.push_str(&format!("# {k}: {}\n", csv_field(v)));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(csv_field).collect();
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> std::io::Result<()> {
        let text = self.render(format);
        match out {
            Some(path) => std::fs::write(path, text),
            None => std::io::stdout().lock().write_all(text.as_bytes()),
        }
    }
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A float as JSON, with non-finite values as `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc() -> Document {
        let mut config = Map::new();
        config.insert("seed".into(), json!(3));
        let mut d = Document::new("volume", config, vec!["mean".into(), "note".into()]);
        d.meta("kappa", 0.5);
        d.push(vec![num(1.5), json!("a,b")]);
        d.push(vec![num(f64::NAN), Value::Null]);
        d
    }

    #[test]
    fn csv_layout() {
        let text = doc().render(Format::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            [
                "# command: volume",
                "# config: {\"seed\":3}",
                "# kappa: 0.5",
                "mean,note",
                "1.5,\"a,b\"",
                ",",
            ]
        );
    }

    #[test]
    fn json_round_trip() {
        let v: Value = serde_json::from_str(&doc().render(Format::Json)).unwrap();
        assert_eq!(v["command"], "volume");
        assert_eq!(v["config"]["seed"], 3);
        assert_eq!(v["rows"][0]["mean"], 1.5);
        assert!(v["rows"][1]["mean"].is_null());
        // column order is kept
        let keys: Vec<&String> = v["rows"][0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["mean", "note"]);
    }
}
