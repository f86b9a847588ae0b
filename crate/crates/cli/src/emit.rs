//! Byte-stable result emission: keys sorted (JSON maps are ordered), floats
//! fixed at 12 significant digits, so identical runs produce identical
//! bytes.

use serde_json::{Map, Number, Value};
use std::fs;
use std::path::{Path, PathBuf};

/// Formats a float at 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

/// Rounds a float to 12 significant digits (for JSON values, which then
/// round-trip through parse without loss).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt_sig(x).parse().unwrap()
}

pub fn json_num(x: f64) -> Value {
    match Number::from_f64(round_sig(x)) {
        Some(n) => Value::Number(n),
        None => Value::String(format!("{x}")),
    }
}

/// Rounds every number inside a JSON value to the stable precision.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    return json_num(f);
                }
            }
            Value::Number(n)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => {
            // serde_json maps are BTree-backed: keys come out sorted.
            let mut m = Map::new();
            for (k, val) in o {
                m.insert(k, round_json(val));
            }
            Value::Object(m)
        }
        other => other,
    }
}

pub struct Emitter {
    out_dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    pub fn new(out_dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(Self { out_dir: out_dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write_json(&mut self, name: &str, value: Value) -> std::io::Result<()> {
        let stable = round_json(value);
        let text = serde_json::to_string_pretty(&stable).expect("json serialization");
        fs::write(self.out_dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(self.out_dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes the run manifest: config echo, artifact version, seed, command
    /// and the list of emitted files.
    pub fn finish_manifest(
        mut self,
        command: &str,
        config_echo: &str,
        seed: u64,
        threads: usize,
    ) -> std::io::Result<()> {
        self.files.sort();
        let mut m = Map::new();
        m.insert("artifact_version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        m.insert("command".into(), Value::String(command.into()));
        m.insert("config".into(), Value::String(config_echo.into()));
        m.insert("seed".into(), Value::Number(seed.into()));
        m.insert("threads".into(), Value::Number(threads.into()));
        m.insert(
            "files".into(),
            Value::Array(self.files.iter().map(|f| Value::String(f.clone())).collect()),
        );
        let text = serde_json::to_string_pretty(&Value::Object(m)).expect("manifest");
        fs::write(self.out_dir.join("manifest.json"), text + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digit_round_trip() {
        let x = 0.123456789012345678;
        let r = round_sig(x);
        assert_eq!(r, fmt_sig(x).parse::<f64>().unwrap());
        // 12 significant digits survive a JSON round trip.
        let v = json_num(x);
        let back: f64 = v.as_f64().unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [1.0 / 3.0, 9.066e-1, -2.5e-17, 163.39184] {
            assert_eq!(round_sig(round_sig(x)), round_sig(x));
        }
    }
}
