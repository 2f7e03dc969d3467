//! CSV ingestion and emission.
//!
//! Dataset schema: header `x1,..,xd,t,y`, UTF-8, decimal-point reals, LF
//! endings. Treatment parses strictly as 0/1. Floats are written with
//! Rust's shortest round-trip formatting, so save -> load is exact for
//! finite values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::data::{CausalDataset, CausalRecord, Treatment};
use crate::error::{Error, Result};
use crate::Real;

fn parse_cell(raw: &str, row: usize, col: &str) -> Result<Real> {
    raw.trim().parse::<Real>().map_err(|_| Error::Parse {
        row,
        col: col.to_string(),
        what: format!("expected a real number, got {raw:?}"),
    })
}

/// Load a dataset from `x1..xd,t,y` CSV.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<CausalDataset<Real>> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    load_dataset_str(&text)
}

/// Parse a dataset from CSV text (same schema as [`load_dataset_csv`]).
pub fn load_dataset_str(text: &str) -> Result<CausalDataset<Real>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            col: "-".into(),
            what: e.to_string(),
        })?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if names.len() < 3 || names[names.len() - 2] != "t" || names[names.len() - 1] != "y" {
        return Err(Error::Parse {
            row: 0,
            col: "-".into(),
            what: format!("header must end with t,y; got {names:?}"),
        });
    }
    let d = names.len() - 2;
    for (i, name) in names[..d].iter().enumerate() {
        let expected = format!("x{}", i + 1);
        if name != &expected {
            return Err(Error::Parse {
                row: 0,
                col: name.clone(),
                what: format!("expected covariate column {expected}"),
            });
        }
    }

    let mut records = Vec::new();
    for (ridx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            row: ridx + 1,
            col: "-".into(),
            what: e.to_string(),
        })?;
        if row.len() != names.len() {
            return Err(Error::Parse {
                row: ridx + 1,
                col: "-".into(),
                what: format!("expected {} fields, got {}", names.len(), row.len()),
            });
        }
        let mut x = Vec::with_capacity(d);
        for k in 0..d {
            x.push(parse_cell(&row[k], ridx + 1, &names[k])?);
        }
        let t_raw = row[d].trim();
        let t = match t_raw {
            "0" => Treatment::Control,
            "1" => Treatment::Treated,
            other => {
                return Err(Error::Parse {
                    row: ridx + 1,
                    col: "t".into(),
                    what: format!("treatment must be 0 or 1, got {other:?}"),
                })
            }
        };
        let y = parse_cell(&row[d + 1], ridx + 1, "y")?;
        records.push(CausalRecord { x, t, y });
    }
    CausalDataset::new(records)
}

/// Write a dataset as `x1..xd,t,y` CSV.
pub fn save_dataset_csv(data: &CausalDataset<Real>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    write_dataset(data, &mut out)
}

pub fn write_dataset(data: &CausalDataset<Real>, out: &mut impl Write) -> Result<()> {
    let header: Vec<String> = (1..=data.dim())
        .map(|i| format!("x{i}"))
        .chain(["t".to_string(), "y".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for r in data.records() {
        for v in &r.x {
            write!(out, "{v},")?;
        }
        writeln!(out, "{},{}", r.t.as_int(), r.y)?;
    }
    Ok(())
}

/// Load a single-column file of values for marginal fitting. Accepts an
/// optional `y` header; otherwise every line must be a number.
pub fn load_values_csv(path: impl AsRef<Path>) -> Result<Vec<Real>> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if i == 0 && line.parse::<Real>().is_err() {
            if line == "y" {
                continue;
            }
            return Err(Error::Parse {
                row: 1,
                col: "y".into(),
                what: format!("expected a number or a 'y' header, got {line:?}"),
            });
        }
        values.push(parse_cell(line, i + 1, "y")?);
    }
    if values.is_empty() {
        return Err(Error::invalid("no values in input"));
    }
    Ok(values)
}

pub fn save_values_csv(values: &[Real], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "y")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}
