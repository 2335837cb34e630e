//! Plain-text path format: one value per line, or a single-column CSV.
//! A non-numeric first row is treated as a header. Blank lines are skipped.

use std::fs;
use std::io::Write;

use super::Path;
use crate::error::{Error, Result};

pub fn parse_path(text: &str) -> Result<Path> {
    let mut values = Vec::new();
    let mut seen_row = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let field = first_field(raw);
        if field.is_empty() {
            continue;
        }
        let first = !seen_row;
        seen_row = true;
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Parse {
                    line,
                    message: format!("value {v} is not finite"),
                })
            }
            // header row
            Err(_) if first => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line,
                    message: format!("cannot parse {field:?} as a number"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "input contains no values".into(),
        });
    }
    Path::new(values)
}

fn first_field(raw: &str) -> &str {
    let field = raw.split(',').next().unwrap_or("").trim();
    field.trim_matches('"').trim()
}

pub fn read_path_file(file: &std::path::Path) -> Result<Path> {
    let text = fs::read_to_string(file)?;
    parse_path(&text)
}

/// Writes one value per line using the shortest round-trip representation.
pub fn write_path<W: Write>(out: &mut W, path: &Path) -> Result<()> {
    for v in path.values() {
        writeln!(out, "{v}")?;
    }
    Ok(())
}
