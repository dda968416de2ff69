use serde_json::{Map, Number, Value as Json};

use crate::config::{render_real, Format, Value};

/// A numeric table plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub config: Vec<(&'static str, Value)>,
    /// Write `config` as a `#` preamble in CSV output as well.
    pub echo_config: bool,
    /// Written as `#` lines after the CSV rows and as `"summary"` in JSON.
    pub summary: Vec<(&'static str, Value)>,
}

impl Table {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.echo_config {
            for (key, value) in &self.config {
                out.push_str(&format!("# {key} = {value}\n"));
            }
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| render_real(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for (key, value) in &self.summary {
            out.push_str(&format!("# {key} = {value}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut doc = Map::new();
        doc.insert("config".into(), object(&self.config));
        doc.insert(
            "rows".into(),
            Json::Array(
                self.rows
                    .iter()
                    .map(|row| Json::Array(row.iter().map(|&x| real(x)).collect()))
                    .collect(),
            ),
        );
        doc.insert(
            "columns".into(),
            Json::Array(
                self.columns
                    .iter()
                    .map(|c| Json::String((*c).into()))
                    .collect(),
            ),
        );
        if !self.summary.is_empty() {
            doc.insert("summary".into(), object(&self.summary));
        }
        let mut text = Json::Object(doc).to_string();
        text.push('\n');
        text
    }
}

fn real(x: f64) -> Json {
    Number::from_f64(x).map_or(Json::Null, Json::Number)
}

fn object(entries: &[(&'static str, Value)]) -> Json {
    let mut map = Map::new();
    for (key, value) in entries {
        let v = match value {
            Value::Real(x) => real(*x),
            Value::Count(n) => Json::Number((*n as u64).into()),
        };
        map.insert((*key).into(), v);
    }
    Json::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        Table {
            columns: vec!["z", "f"],
            rows: vec![vec![20.0, 0.015], vec![0.002, 1e-29]],
            config: vec![("np", Value::Count(2)), ("zmax", Value::Real(20.0))],
            echo_config: false,
            summary: vec![],
        }
    }

    #[test]
    fn csv_layout() {
        assert_eq!(sample().to_csv(), "z,f\n20.0,0.015\n0.002,1e-29\n");
        let t = Table {
            echo_config: true,
            summary: vec![("residual", Value::Real(0.5))],
            ..sample()
        };
        assert_eq!(
            t.to_csv(),
            "# np = 2\n# zmax = 20.0\nz,f\n20.0,0.015\n0.002,1e-29\n# residual = 0.5\n"
        );
    }

    #[test]
    fn json_layout() {
        let text = sample().to_json();
        let v: Json = serde_json::from_str(&text).unwrap();
        assert_eq!(v["columns"], serde_json::json!(["z", "f"]));
        assert_eq!(v["config"]["np"], 2);
        assert_eq!(v["rows"][1][1].as_f64().unwrap(), 1e-29);
        assert_eq!(v["rows"][0][1].as_f64().unwrap(), 0.015);
        assert!(v.get("summary").is_none());
        assert!(text.ends_with('\n'));
    }
}
