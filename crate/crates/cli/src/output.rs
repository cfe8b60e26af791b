//! Report emission. Floats carry 17 significant digits so that reading a
//! report back and writing it again reproduces it byte for byte.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{config_err, CliResult};

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with two-space indentation and sorted keys.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> CliResult<String> {
    let v = serde_json::to_value(value).map_err(|e| config_err(e.to_string()))?;
    let mut s = String::new();
    write_value(&mut s, &v, 0);
    s.push('\n');
    Ok(s)
}

fn write_value(s: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => write!(s, "{u}").unwrap(),
            (_, Some(i), _) => write!(s, "{i}").unwrap(),
            (_, _, Some(f)) => s.push_str(&float(f)),
            _ => s.push_str(&n.to_string()),
        },
        Value::String(t) => s.push_str(&Value::String(t.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                s.push_str("[]");
                return;
            }
            s.push('[');
            for (i, item) in items.iter().enumerate() {
                s.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(s, depth + 1);
                write_value(s, item, depth + 1);
            }
            s.push('\n');
            indent(s, depth);
            s.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                s.push_str("{}");
                return;
            }
            s.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                s.push_str(if i == 0 { "\n" } else { ",\n" });
                indent(s, depth + 1);
                s.push_str(&Value::String(k.clone()).to_string());
                s.push_str(": ");
                write_value(s, item, depth + 1);
            }
            s.push('\n');
            indent(s, depth);
            s.push('}');
        }
    }
}

fn indent(s: &mut String, depth: usize) {
    for _ in 0..depth {
        s.push_str("  ");
    }
}

/// Writes to `out`, or stdout when absent.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}
