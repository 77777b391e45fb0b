//! JSON-lines traces: one object per round, keys in record order, reals
//! written with 17 significant digits and non-finite reals as `null`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use safelearn_core::RoundRecord;
use serde_json::{Map, Value};

use crate::Result;

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                let x = n.as_f64().unwrap_or(f64::NAN);
                if x.is_finite() {
                    write!(out, "{x:.16e}").unwrap();
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => write_object(out, map),
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>) {
    out.push('{');
    for (i, (k, v)) in map.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(k).unwrap());
        out.push(':');
        write_value(out, v);
    }
    out.push('}');
}

/// A single trace line without the newline.
pub fn record_line(rec: &RoundRecord) -> Result<String> {
    // serde_json maps non-finite floats to null on its own
    let value = serde_json::to_value(rec)?;
    let mut out = String::with_capacity(512);
    write_value(&mut out, &value);
    Ok(out)
}

pub fn write_trace<W: Write>(mut w: W, records: &[RoundRecord]) -> Result<()> {
    for rec in records {
        let line = record_line(rec)?;
        writeln!(w, "{line}").map_err(crate::io_err("<trace>"))?;
    }
    w.flush().map_err(crate::io_err("<trace>"))?;
    Ok(())
}

/// Parses each line into a generic JSON object.
pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<Value>> {
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line.map_err(crate::io_err("<trace>"))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line)?);
    }
    Ok(rows)
}
