//! Validators for every file the CLI writes. JSON files must parse into
//! their type and re-serialize to the same bytes; CSV files must have the
//! expected header and cells in canonical form.

use std::path::Path;

use lattice_clt::blocks::BlockPlan;
use lattice_clt::fields::{FieldGrid, GridHeader};
use lattice_clt::geometry::AmReport;
use lattice_clt::harness::ExperimentReport;

use crate::commands::Metadata;
use crate::{parse_json, to_json, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Correlogram,
    AmDiagnostic,
    FieldCsv,
    FieldHeader,
    FieldBinary,
    Report,
    Table,
    Histogram,
    Qq,
    Plan,
    Remainder,
    Dependence,
    Metadata,
}

/// File kind from its name, as written by the CLI.
pub fn kind_of(path: &Path) -> Option<FileKind> {
    let name = path.file_name()?.to_str()?;
    let kind = match name {
        "correlogram.csv" => FileKind::Correlogram,
        "am_diagnostic.json" => FileKind::AmDiagnostic,
        "field.csv" => FileKind::FieldCsv,
        "field.header.json" => FileKind::FieldHeader,
        "field.bin" => FileKind::FieldBinary,
        "report.json" => FileKind::Report,
        "table.csv" => FileKind::Table,
        "plan.json" => FileKind::Plan,
        "remainder.csv" => FileKind::Remainder,
        "dependence.csv" => FileKind::Dependence,
        "metadata.json" => FileKind::Metadata,
        n if n.starts_with("hist_N") && n.ends_with(".csv") => FileKind::Histogram,
        n if n.starts_with("qq_N") && n.ends_with(".csv") => FileKind::Qq,
        _ => return None,
    };
    Some(kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Int,
    UInt,
    Float,
    OptFloat,
    Bool,
}

fn invalid(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", path.display()))
}

fn check_cell(ty: Cell, s: &str) -> bool {
    match ty {
        Cell::Int => s.parse::<i64>().map(|v| v.to_string() == s).unwrap_or(false),
        Cell::UInt => s.parse::<u64>().map(|v| v.to_string() == s).unwrap_or(false),
        Cell::Float => s.parse::<f64>().map(|v| v.is_finite() && v.to_string() == s).unwrap_or(false),
        Cell::OptFloat => s.is_empty() || check_cell(Cell::Float, s),
        Cell::Bool => s == "true" || s == "false",
    }
}

fn check_csv(
    path: &Path,
    bytes: &[u8],
    expected: impl Fn(&[String]) -> Option<Vec<Cell>>,
) -> CliResult<Vec<Vec<String>>> {
    if bytes.contains(&b'\r') {
        return Err(invalid(path, "CRLF line ending"));
    }
    if !bytes.is_empty() && !bytes.ends_with(b"\n") {
        return Err(invalid(path, "missing final newline"));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header: Vec<String> = rdr.headers().map_err(|e| invalid(path, e))?.iter().map(String::from).collect();
    let types = expected(&header).ok_or_else(|| invalid(path, format!("unexpected header {header:?}")))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| invalid(path, e))?;
        if rec.len() != types.len() {
            return Err(invalid(path, format!("row {} has {} cells, expected {}", i + 1, rec.len(), types.len())));
        }
        for (c, (cell, &ty)) in rec.iter().zip(&types).enumerate() {
            if !check_cell(ty, cell) {
                return Err(invalid(path, format!("row {} column `{}`: bad cell `{cell}`", i + 1, header[c])));
            }
        }
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(rows)
}

fn fixed(names: &'static [(&'static str, Cell)]) -> impl Fn(&[String]) -> Option<Vec<Cell>> {
    move |h| {
        (h.len() == names.len() && h.iter().zip(names).all(|(a, (b, _))| a == b))
            .then(|| names.iter().map(|c| c.1).collect())
    }
}

/// `k_1..k_d` starting at position `from`; returns `d`.
fn lag_columns(h: &[String], from: usize, prefix: &str) -> Option<usize> {
    let d = h[from..].iter().take_while(|c| c.starts_with(prefix)).count();
    (d > 0 && (1..=d).all(|i| h[from + i - 1] == format!("{prefix}{i}"))).then_some(d)
}

fn json_roundtrip<T: serde::de::DeserializeOwned + serde::Serialize>(path: &Path, bytes: &[u8]) -> CliResult<T> {
    let text = std::str::from_utf8(bytes).map_err(|e| invalid(path, e))?;
    let value: T = parse_json(text).map_err(|m| invalid(path, m))?;
    if to_json(&value)? != text {
        return Err(invalid(path, "not in canonical form"));
    }
    Ok(value)
}

pub fn validate_file(path: &Path) -> CliResult<FileKind> {
    let kind = kind_of(path).ok_or_else(|| invalid(path, "unknown output file"))?;
    let bytes = std::fs::read(path).map_err(|e| invalid(path, e))?;
    match kind {
        FileKind::Correlogram => {
            let rows = check_csv(path, &bytes, |h| {
                if h.len() < 5 || h[0] != "N" {
                    return None;
                }
                let d = lag_columns(h, 1, "k_")?;
                (h.len() == d + 4 && h[d + 1..] == ["numerator", "denominator", "value"]).then(|| {
                    let mut t = vec![Cell::UInt];
                    t.extend(std::iter::repeat_n(Cell::Int, d));
                    t.extend([Cell::UInt, Cell::UInt, Cell::Float]);
                    t
                })
            })?;
            for r in rows {
                let n = r.len();
                let (num, den): (u64, u64) = (r[n - 3].parse().unwrap(), r[n - 2].parse().unwrap());
                if (num as f64 / den as f64).to_string() != r[n - 1] {
                    return Err(invalid(path, "value differs from numerator / denominator"));
                }
            }
        }
        FileKind::FieldCsv => {
            check_csv(path, &bytes, |h| {
                let d = lag_columns(h, 0, "x_")?;
                (h.len() == d + 1 && h[d] == "value").then(|| {
                    let mut t = vec![Cell::Int; d];
                    t.push(Cell::Float);
                    t
                })
            })?;
        }
        FileKind::Table => {
            check_csv(
                path,
                &bytes,
                fixed(&[
                    ("N", Cell::UInt),
                    ("cardAN", Cell::UInt),
                    ("empVar", Cell::Float),
                    ("lemma1Var", Cell::OptFloat),
                    ("sigma2", Cell::Float),
                    ("ksStat", Cell::OptFloat),
                    ("lyapunov", Cell::OptFloat),
                    ("remainderFrac", Cell::OptFloat),
                ]),
            )?;
        }
        FileKind::Histogram => {
            check_csv(
                path,
                &bytes,
                fixed(&[
                    ("lo", Cell::Float),
                    ("hi", Cell::Float),
                    ("count", Cell::UInt),
                    ("density", Cell::Float),
                    ("normal_density", Cell::Float),
                ]),
            )?;
        }
        FileKind::Qq => {
            check_csv(path, &bytes, fixed(&[("theoretical", Cell::Float), ("empirical", Cell::Float)]))?;
        }
        FileKind::Remainder => {
            check_csv(
                path,
                &bytes,
                fixed(&[
                    ("N", Cell::UInt),
                    ("p", Cell::UInt),
                    ("q", Cell::UInt),
                    ("k_N", Cell::UInt),
                    ("complement_card", Cell::UInt),
                    ("exact", Cell::Float),
                    ("c", Cell::Float),
                    ("bound", Cell::Float),
                    ("asymptotic_bound", Cell::Float),
                    ("holds", Cell::Bool),
                ]),
            )?;
        }
        FileKind::Dependence => {
            check_csv(
                path,
                &bytes,
                fixed(&[("distance", Cell::Int), ("t", Cell::Float), ("gap", Cell::Float), ("stderr", Cell::Float)]),
            )?;
        }
        FileKind::AmDiagnostic => {
            json_roundtrip::<AmReport>(path, &bytes)?;
        }
        FileKind::FieldHeader => {
            json_roundtrip::<GridHeader>(path, &bytes)?;
        }
        FileKind::Report => {
            json_roundtrip::<ExperimentReport>(path, &bytes)?;
        }
        FileKind::Plan => {
            let plan = json_roundtrip::<BlockPlan>(path, &bytes)?;
            plan.verify().map_err(|e| invalid(path, e))?;
        }
        FileKind::Metadata => {
            json_roundtrip::<Metadata>(path, &bytes)?;
        }
        FileKind::FieldBinary => {
            let header_path = path.with_file_name("field.header.json");
            let text = std::fs::read_to_string(&header_path).map_err(|e| invalid(&header_path, e))?;
            let header: GridHeader = parse_json(&text).map_err(|m| invalid(&header_path, m))?;
            let grid = FieldGrid::read_binary(&header, &bytes).map_err(|e| invalid(path, e))?;
            let mut again = Vec::with_capacity(bytes.len());
            grid.write_binary(&mut again).map_err(|e| invalid(path, e))?;
            if again != bytes {
                return Err(invalid(path, "binary grid does not round-trip"));
            }
        }
    }
    Ok(kind)
}

/// Validates every recognized file in `dir`, in name order.
pub fn validate_dir(dir: &Path) -> CliResult<Vec<(String, FileKind)>> {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| invalid(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| kind_of(p).is_some())
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|p| {
            let kind = validate_file(&p)?;
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), kind))
        })
        .collect()
}
