//! File formats: whitespace-separated symbol files and JSON documents with
//! full-precision floats.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Parses a symbol file. Every token must be an integer in `0..m`; errors
/// carry the 1-based line and column of the offending token.
pub fn parse_symbols(path: &str, text: &str, m: usize) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::with_capacity(text.len() / 2);
    for (line_no, line) in text.lines().enumerate() {
        let mut rest = line;
        let mut column = 1;
        while !rest.is_empty() {
            let skip = rest.len() - rest.trim_start().len();
            column += rest[..skip].chars().count();
            rest = &rest[skip..];
            if rest.is_empty() {
                break;
            }
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let token = &rest[..end];
            let fail = |message: String| CliError::Parse {
                path: path.to_string(),
                line: line_no + 1,
                column,
                message,
            };
            let symbol: usize = token.parse().map_err(|_| {
                fail(format!(
                    "expected a nonnegative integer symbol, found {token:?}"
                ))
            })?;
            if symbol >= m {
                return Err(fail(format!(
                    "symbol {symbol} is outside the alphabet 0..{m}"
                )));
            }
            out.push(symbol);
            column += token.chars().count();
            rest = &rest[end..];
        }
    }
    Ok(out)
}

/// Symbols separated by spaces, 64 per line.
pub fn write_symbols(symbols: &[usize]) -> String {
    let mut out = String::with_capacity(symbols.len() * 2 + 1);
    for (i, chunk) in symbols.chunks(64).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (k, s) in chunk.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            write!(out, "{s}").expect("writing to a String");
        }
    }
    out.push('\n');
    out
}

/// 17 significant digits; non-finite values become `null`.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// Pretty JSON with every float written by [`float`].
pub fn to_document<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("reports serialize to JSON");
    let mut out = String::new();
    write_value(&value, 0, &mut out);
    out.push('\n');
    out
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => out.push_str(&float(x)),
            _ => out.push_str(&n.to_string()),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(item, indent, out);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("keys serialize"));
                out.push_str(": ");
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}
