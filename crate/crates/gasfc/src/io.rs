//! CSV ingestion and every CSV artifact the CLI writes. Floats are written
//! with `{}` (shortest round-trip form) and lines end in `\n`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use gasfc_core::data::{csv_columns, RawRecord, YearMonth, FEATURE_COUNT};
use gasfc_core::training::LogRow;

use crate::error::{AppError, Result};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(path: &Path, e: csv::Error) -> AppError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => AppError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(AppError::io(path))
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    }
    File::create(path).map_err(AppError::io(path))
}

/// Empty, unparseable and non-finite cells all read as missing.
fn cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Maps each expected column to its position in `header`, or reports the
/// difference between the two sets.
fn column_map(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<Vec<usize>> {
    let found: BTreeMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let missing: Vec<String> = expected
        .iter()
        .filter(|c| !found.contains_key(*c))
        .map(|c| c.to_string())
        .collect();
    let mut unexpected: Vec<String> = header
        .iter()
        .filter(|h| !expected.contains(h))
        .map(str::to_string)
        .collect();
    if found.len() != header.len() {
        unexpected.push("(duplicate column)".into());
    }
    if !missing.is_empty() || !unexpected.is_empty() {
        return Err(AppError::Schema {
            path: path.to_path_buf(),
            missing,
            unexpected,
        });
    }
    Ok(expected.iter().map(|c| found[c]).collect())
}

/// Reads monthly records. Column order is free; the column set must match
/// exactly.
pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    read_records_from(path, open(path)?)
}

pub fn read_records_from<R: Read>(path: &Path, input: R) -> Result<Vec<RawRecord>> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let map = column_map(path, &header, &csv_columns())?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |k: usize| row.get(map[k]).unwrap_or("");
        let date: YearMonth = get(0).parse().map_err(|e| AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{e}"),
        })?;
        out.push(RawRecord {
            date,
            features: std::array::from_fn(|j| cell(get(j + 1))),
            target: cell(get(FEATURE_COUNT + 1)),
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_records(path: &Path, records: &[RawRecord]) -> Result<()> {
    write_records_to(path, create(path)?, records)
}

pub fn write_records_to<W: Write>(path: &Path, out: W, records: &[RawRecord]) -> Result<()> {
    let mut w = writer(out);
    let err = |e| csv_err(path, e);
    w.write_record(csv_columns()).map_err(err)?;
    for r in records {
        let mut row = vec![r.date.to_string()];
        row.extend(r.features.iter().map(|v| fmt_opt(*v)));
        row.push(fmt_opt(r.target));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(AppError::io(path))
}

/// Writes a header plus rows of preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(create(path)?);
    let err = |e| csv_err(path, e);
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(AppError::io(path))
}

pub const FORECAST_HEADER: [&str; 2] = ["year", "predicted_ml_day"];
pub const EMISSIONS_HEADER: [&str; 2] = ["year", "tonnes_co2"];
pub const LOG_HEADER: [&str; 3] = ["iteration", "train_rmse", "train_mae"];
pub const SERIES_HEADER: [&str; 3] = ["series", "year", "value"];

pub fn write_year_values(path: &Path, header: [&str; 2], rows: &[(i32, f64)]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(y, v)| vec![y.to_string(), v.to_string()])
        .collect();
    write_table(path, &header, &rows)
}

/// Reads a two-column `year,<value>` file such as a forecast.
pub fn read_year_values(path: &Path, header: [&str; 2]) -> Result<Vec<(i32, f64)>> {
    let mut rdr = reader(open(path)?);
    let head = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let map = column_map(path, &head, &header)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |what: &str| AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {what}"),
        };
        let year = row[map[0]].parse::<i32>().map_err(|_| bad(header[0]))?;
        let value = cell(&row[map[1]]).ok_or_else(|| bad(header[1]))?;
        out.push((year, value));
    }
    Ok(out)
}

pub fn write_log(path: &Path, log: &[LogRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                r.train_rmse.to_string(),
                r.train_mae.to_string(),
            ]
        })
        .collect();
    write_table(path, &LOG_HEADER, &rows)
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut rdr = reader(open(path)?);
    let head = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let map = column_map(path, &head, &LOG_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = || AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: "invalid log row".into(),
        };
        out.push(LogRow {
            iteration: row[map[0]].parse().map_err(|_| bad())?,
            train_rmse: row[map[1]].parse().map_err(|_| bad())?,
            train_mae: row[map[2]].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Long-format plotting rows: `(series, year, value)`.
pub fn write_series(path: &Path, rows: &[(String, i32, f64)]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(s, y, v)| vec![s.clone(), y.to_string(), v.to_string()])
        .collect();
    write_table(path, &SERIES_HEADER, &rows)
}

/// `(feature index, (year, value) path)` per override column.
pub type ScenarioPaths = Vec<(usize, Vec<(i32, f64)>)>;

/// Scenario overrides: a `year` column plus any subset of feature columns.
/// Returns `(feature index, path)` for each feature column present; empty
/// cells are left out of the path and so become gaps.
pub fn read_scenario(path: &Path) -> Result<ScenarioPaths> {
    let mut rdr = reader(open(path)?);
    let head = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let names = &csv_columns()[1..=FEATURE_COUNT];
    let year_col = head.iter().position(|h| h == "year");
    let unexpected: Vec<String> = head
        .iter()
        .filter(|h| *h != "year" && !names.contains(h))
        .map(str::to_string)
        .collect();
    let year_col = match year_col {
        Some(c) if unexpected.is_empty() => c,
        _ => {
            return Err(AppError::Schema {
                path: path.to_path_buf(),
                missing: if year_col.is_none() {
                    vec!["year".into()]
                } else {
                    Vec::new()
                },
                unexpected,
            })
        }
    };
    let cols: Vec<(usize, usize)> = head
        .iter()
        .enumerate()
        .filter_map(|(i, h)| names.iter().position(|n| *n == h).map(|f| (i, f)))
        .collect();
    let mut paths: Vec<(usize, Vec<(i32, f64)>)> =
        cols.iter().map(|&(_, f)| (f, Vec::new())).collect();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let year = row[year_col].parse::<i32>().map_err(|_| AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid year `{}`", &row[year_col]),
        })?;
        for (k, &(i, _)) in cols.iter().enumerate() {
            if let Some(v) = cell(&row[i]) {
                paths[k].1.push((year, v));
            }
        }
    }
    Ok(paths)
}
