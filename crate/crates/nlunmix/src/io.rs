//! File formats: endmember CSV, scene directories, abundance grids and JSON.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! value reads back bit-exactly. Files are written to a sibling temporary and
//! renamed into place, so an interrupted run never leaves a truncated output.

use std::fs;
use std::path::{Path, PathBuf};

use nlunmix_core::{EndmemberMatrix, Matrix, Scene, SceneMeta};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const PIXELS_FILE: &str = "pixels.csv";
pub const ABUNDANCES_FILE: &str = "abundances.csv";
pub const META_FILE: &str = "meta.json";

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    if let Err(e) = fs::write(&tmp, bytes) {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(&tmp, e));
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}

fn csv_writer() -> csv::WriterBuilder {
    let mut b = csv::WriterBuilder::new();
    b.has_headers(false);
    b
}

fn finish_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Writes a headerless numeric grid, one matrix row per line.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv_writer().from_writer(Vec::new());
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(|e| csv_io(path, e))?;
    }
    finish_csv(path, w)
}

fn parse_cell(path: &Path, row: usize, col: usize, cell: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        path: path.to_owned(),
        row,
        col,
        msg: format!("not a number: {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_owned(),
            row,
            col,
            msg: format!("non-finite value {cell:?}"),
        });
    }
    Ok(v)
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec);
    }
    Ok(out)
}

/// Parses `records` (starting at 1-based line `first_row`) into rows of
/// numbers, all of length `width`.
fn numeric_rows(
    path: &Path,
    records: &[csv::StringRecord],
    first_row: usize,
    width: usize,
) -> Result<Vec<Vec<f64>>> {
    records
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let row = first_row + k;
            if rec.len() != width {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    row,
                    col: rec.len().min(width) + 1,
                    msg: format!("expected {width} columns, found {}", rec.len()),
                });
            }
            rec.iter()
                .enumerate()
                .map(|(c, cell)| parse_cell(path, row, c + 1, cell))
                .collect()
        })
        .collect()
}

/// Reads a headerless numeric grid.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let records = read_records(path)?;
    let width = records.first().map_or(0, |r| r.len());
    if records.is_empty() || width == 0 {
        return Err(Error::Parse {
            path: path.to_owned(),
            row: 1,
            col: 1,
            msg: "empty file".into(),
        });
    }
    let rows = numeric_rows(path, &records, 1, width)?;
    Ok(Matrix::from_rows(&rows).expect("rows checked to equal width"))
}

/// Loads endmembers from either a headerless `L×R` grid or a file whose
/// header is `wavelength,name_1,…,name_R` followed by one row per band.
pub fn load_endmembers_csv(path: &Path) -> Result<EndmemberMatrix> {
    let records = read_records(path)?;
    let Some(first) = records.first() else {
        return Err(Error::Parse {
            path: path.to_owned(),
            row: 1,
            col: 1,
            msg: "empty file".into(),
        });
    };
    let headed = first.iter().any(|c| c.parse::<f64>().is_err());
    if !headed {
        let rows = numeric_rows(path, &records, 1, first.len())?;
        let data = Matrix::from_rows(&rows).expect("rows checked to equal width");
        return Ok(EndmemberMatrix::new(data)?);
    }
    if !first
        .get(0)
        .is_some_and(|c| c.eq_ignore_ascii_case("wavelength"))
    {
        return Err(Error::Parse {
            path: path.to_owned(),
            row: 1,
            col: 1,
            msg: "header must start with \"wavelength\"".into(),
        });
    }
    let names: Vec<String> = first.iter().skip(1).map(str::to_owned).collect();
    let rows = numeric_rows(path, &records[1..], 2, first.len())?;
    let wavelengths: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].to_vec()).collect();
    let data = Matrix::from_rows(&values).expect("rows checked to equal width");
    Ok(EndmemberMatrix::with_metadata(
        data,
        Some(wavelengths),
        Some(names),
    )?)
}

/// Writes the headed form when wavelengths or names are known, the plain grid
/// otherwise.
pub fn save_endmembers_csv(path: &Path, m: &EndmemberMatrix) -> Result<()> {
    if m.wavelengths().is_none() && m.names().is_none() {
        return write_matrix_csv(path, m.matrix());
    }
    let mut w = csv_writer().from_writer(Vec::new());
    let mut header = vec!["wavelength".to_owned()];
    match m.names() {
        Some(names) => header.extend(names.iter().cloned()),
        None => header.extend((1..=m.endmembers()).map(|i| format!("em_{i}"))),
    }
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for l in 0..m.bands() {
        let wl = m.wavelengths().map_or(l as f64, |w| w[l]);
        let row = std::iter::once(wl).chain(m.matrix().row(l).iter().copied());
        w.write_record(row.map(|v| v.to_string()))
            .map_err(|e| csv_io(path, e))?;
    }
    finish_csv(path, w)
}

/// Writes `pixels.csv` (`L×N`), `abundances.csv` (`R×N`, if known) and
/// `meta.json` (if known) into `dir`.
pub fn save_scene(dir: &Path, scene: &Scene) -> Result<()> {
    write_matrix_csv(&dir.join(PIXELS_FILE), scene.pixels())?;
    if let Some(a) = scene.abundances() {
        write_matrix_csv(&dir.join(ABUNDANCES_FILE), a)?;
    }
    if let Some(meta) = scene.meta() {
        write_json(&dir.join(META_FILE), meta)?;
    }
    Ok(())
}

pub fn load_scene(dir: &Path) -> Result<Scene> {
    let pixels = read_matrix_csv(&dir.join(PIXELS_FILE))?;
    let ab_path = dir.join(ABUNDANCES_FILE);
    let abundances = if ab_path.exists() {
        Some(read_matrix_csv(&ab_path)?)
    } else {
        None
    };
    let meta_path = dir.join(META_FILE);
    let meta: Option<SceneMeta> = if meta_path.exists() {
        Some(read_json(&meta_path)?)
    } else {
        None
    };
    Ok(Scene::new(pixels, abundances, meta)?)
}
