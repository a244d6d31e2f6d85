use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::Value;

/// Twelve significant digits, the fixed float format of every report.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// `x` rounded to twelve significant digits, for JSON output.
pub fn json_num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = num(x).parse().unwrap();
    serde_json::Number::from_f64(r)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Comma-separated table with a header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_float_format() {
        assert_eq!(num(11.0), "1.10000000000e1");
        assert_eq!(num(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(json_num(1.0 / 3.0).to_string(), "0.333333333333");
        assert_eq!(json_num(f64::NAN), Value::Null);
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["1".into(), "2".into()]);
        assert_eq!(c.into_string(), "a,b\n1,2\n");
    }
}
