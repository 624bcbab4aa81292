//! Reading study CSVs and writing result tables.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use pate_bounds::{OutcomeRange, StudyData, UnitRecord};
use sha2::{Digest, Sha256};

use crate::CliError;

const FIXED_COLUMNS: [&str; 4] = ["id", "z", "w", "y"];

/// A malformed input file. `line` is the 1-based line in the file, so the
/// header is line 1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: line {line}{}: {message}", column.as_ref().map(|c| format!(", column `{c}`")).unwrap_or_default())]
pub struct SchemaError {
    pub path: String,
    pub line: u64,
    pub column: Option<String>,
    pub message: String,
}

fn schema(path: &Path, line: u64, column: Option<&str>, message: impl Into<String>) -> CliError {
    CliError::Schema(SchemaError {
        path: path.display().to_string(),
        line,
        column: column.map(str::to_string),
        message: message.into(),
    })
}

fn check_header(path: &Path, header: &csv::StringRecord) -> Result<usize, CliError> {
    if header.len() < FIXED_COLUMNS.len() {
        return Err(schema(path, 1, None, "header must start with id,z,w,y"));
    }
    for (i, want) in FIXED_COLUMNS.iter().enumerate() {
        if &header[i] != *want {
            return Err(schema(
                path,
                1,
                Some(&header[i]),
                format!("column {} must be `{want}`", i + 1),
            ));
        }
    }
    for (j, name) in header.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        let want = format!("x{}", j + 1);
        if name != want {
            return Err(schema(path, 1, Some(name), format!("expected covariate column `{want}`")));
        }
    }
    Ok(header.len() - FIXED_COLUMNS.len())
}

fn parse_number(path: &Path, line: u64, column: &str, field: &str) -> Result<f64, CliError> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| schema(path, line, Some(column), format!("`{field}` is not a finite number")))
}

fn parse_flag(path: &Path, line: u64, column: &str, field: &str) -> Result<bool, CliError> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(schema(path, line, Some(column), format!("`{other}` must be 0 or 1"))),
    }
}

/// Parses a unit table from any reader.
pub fn parse_units(reader: impl Read, path: &Path) -> Result<Vec<UnitRecord>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| schema(path, 1, None, e.to_string()))?
        .clone();
    let p = check_header(path, &header)?;
    let mut units = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| schema(path, line, None, e.to_string()))?;
        if record.len() != header.len() {
            return Err(schema(
                path,
                line,
                None,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(schema(path, line, Some("id"), "id is empty"));
        }
        let z = parse_flag(path, line, "z", &record[1])?;
        let x = (0..p)
            .map(|j| parse_number(path, line, &header[4 + j], &record[4 + j]))
            .collect::<Result<Vec<_>, _>>()?;
        let (w, y) = (record[2].trim(), record[3].trim());
        let unit = if z {
            let treated = parse_flag(path, line, "w", w)?;
            let y = parse_number(path, line, "y", y)?;
            UnitRecord::sampled(id, treated, y, x)
        } else {
            if !w.is_empty() {
                return Err(schema(path, line, Some("w"), "w must be empty when z = 0"));
            }
            if !y.is_empty() {
                return Err(schema(path, line, Some("y"), "y must be empty when z = 0"));
            }
            UnitRecord::unsampled(id, x)
        };
        units.push(unit);
    }
    Ok(units)
}

pub fn read_study(path: &Path, range: OutcomeRange) -> Result<StudyData, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path.to_path_buf(), e))?;
    let units = parse_units(file, path)?;
    Ok(StudyData::new(units, range)?)
}

/// 17 significant digits, enough to round-trip any `f64`. Missing values
/// are written as `NA`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A CSV result table with a `#` metadata preamble.
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            metadata: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, out: impl Write) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        drop(w);
        out.flush()
    }

    pub fn emit(&self, out: Option<&PathBuf>) -> Result<(), CliError> {
        match out {
            Some(path) => {
                let file = File::create(path).map_err(|e| CliError::io(path.clone(), e))?;
                self.write_to(file).map_err(|e| CliError::io(path.clone(), e))
            }
            None => self
                .write_to(io::stdout().lock())
                .map_err(|e| CliError::io(PathBuf::from("<stdout>"), e)),
        }
    }
}

/// Reads a table written by [`Table::write_to`]: metadata pairs, header and
/// string rows.
pub fn read_table(text: &str) -> Result<Table, csv::Error> {
    let mut metadata = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix("# ") {
            Some(m) => {
                let (k, v) = m.split_once(": ").unwrap_or((m, ""));
                metadata.push((k.to_string(), v.to_string()));
            }
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table {
        metadata,
        header,
        rows,
    })
}
