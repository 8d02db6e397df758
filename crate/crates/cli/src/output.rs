use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::{Format, OutputArgs};

/// Where the output goes: an explicit file, a default file inside the output
/// directory, or stdout.
pub fn destination(output: Option<&Path>, dir: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    match (output, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => Some(d.join(default_name)),
        (None, None) => None,
    }
}

pub fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Shortest round-trip decimals, or 3 decimals under `pretty`.
fn round_field(field: &str) -> String {
    let numeric = field.contains(['.', 'e', 'E']) && !field.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E');
    match field.parse::<f64>() {
        Ok(v) if numeric && v.is_finite() => {
            let r = (v * 1000.0).round() / 1000.0;
            // no negative zero in display output
            format!("{:.3}", if r == 0.0 { 0.0 } else { r })
        }
        _ => field.to_string(),
    }
}

pub fn csv_string<T: Serialize>(rows: &[T], pretty: bool) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let raw = String::from_utf8(writer.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
    if !pretty || raw.is_empty() {
        return Ok(raw);
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(raw.as_bytes());
    let mut writer = csv::Writer::from_writer(Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if i == 0 {
            writer.write_record(&record)?;
        } else {
            writer.write_record(record.iter().map(round_field))?;
        }
    }
    Ok(String::from_utf8(writer.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?)
}

fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            let x = (n.as_f64().unwrap() * 1000.0).round() / 1000.0;
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn json_string<T: Serialize>(value: &T, pretty: bool) -> Result<String> {
    let mut text = if pretty {
        let mut v = serde_json::to_value(value)?;
        round_json(&mut v);
        serde_json::to_string_pretty(&v)?
    } else {
        serde_json::to_string(value)?
    };
    text.push('\n');
    Ok(text)
}

/// Write either a CSV table or the JSON document.
pub fn emit<T: Serialize, J: Serialize>(args: &OutputArgs, name: &str, rows: &[T], json: &J) -> Result<()> {
    let (text, ext) = match args.format {
        Format::Csv => (csv_string(rows, args.pretty)?, "csv"),
        Format::Json => (json_string(json, args.pretty)?, "json"),
    };
    let path = destination(args.output.as_deref(), args.output_dir.as_deref(), &format!("{name}.{ext}"));
    write_text(&text, path.as_deref())?;
    if let Some(p) = path {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}
