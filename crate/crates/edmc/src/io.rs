//! CSV file formats.
//!
//! Matrices and positions are headerless, one row per line; `NaN` (or an
//! empty field) marks a missing matrix entry. Diagnostics, coherence curves
//! and bound reports carry a header row. Lines starting with `#` are
//! ignored on input.

use std::fs;
use std::path::Path;

use edmc_core::coherence::CoherenceCurve;
use edmc_core::completion::IterationRecord;
use edmc_core::theory::BoundReport;
use edmc_core::PositionMatrix;
use nalgebra::DMatrix;

use crate::error::{AppError, AppResult};

/// Shortest round-trip decimal form; `NaN` for missing values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

fn parse_field(path: &Path, line: usize, field: &str) -> AppResult<f64> {
    if field.is_empty() {
        return Ok(f64::NAN);
    }
    field.parse::<f64>().map_err(|_| AppError::Parse {
        path: path.to_path_buf(),
        line,
        reason: format!("not a number: {field:?}"),
    })
}

/// Numeric rows of a headerless CSV. With `skip_header`, a first row that
/// does not parse as numbers is dropped.
fn read_rows(path: &Path, skip_header: bool) -> AppResult<Vec<(usize, Vec<f64>)>> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_rows(file, path, skip_header)
}

fn parse_rows(source: impl std::io::Read, path: &Path, skip_header: bool) -> AppResult<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(source);
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| AppError::csv(path, e))?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: AppResult<Vec<f64>> = record.iter().map(|f| parse_field(path, line, f)).collect();
        match parsed {
            Ok(v) => rows.push((line, v)),
            Err(_) if skip_header && rows.is_empty() && k == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

fn write_records<I, R>(path: &Path, header: Option<&[&str]>, rows: I) -> AppResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| AppError::csv(path, e))?;
    if let Some(h) = header {
        w.write_record(h).map_err(|e| AppError::csv(path, e))?;
    }
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(|e| AppError::csv(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Square matrix; `NaN` or empty fields are missing entries.
pub fn read_matrix(path: &Path) -> AppResult<DMatrix<f64>> {
    let rows = read_rows(path, false)?;
    let n = rows.len();
    for (line, row) in &rows {
        if row.len() != n {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                line: *line,
                reason: format!("expected {n} columns for a square matrix, found {}", row.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i].1[j]))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> AppResult<()> {
    write_records(
        path,
        None,
        (0..m.nrows()).map(|i| (0..m.ncols()).map(move |j| fmt_f64(m[(i, j)]))),
    )
}

/// One point per line, all lines with the same number of coordinates.
pub fn read_positions(path: &Path) -> AppResult<PositionMatrix> {
    positions_from_rows(path, read_rows(path, false)?)
}

/// Positions from in-memory CSV text; `name` labels parse errors.
pub fn parse_positions(text: &str, name: &str) -> AppResult<PositionMatrix> {
    let path = Path::new(name);
    positions_from_rows(path, parse_rows(text.as_bytes(), path, false)?)
}

fn positions_from_rows(path: &Path, rows: Vec<(usize, Vec<f64>)>) -> AppResult<PositionMatrix> {
    let dim = rows.first().map_or(0, |r| r.1.len());
    for (line, row) in &rows {
        if row.len() != dim || row.iter().any(|v| !v.is_finite()) {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                line: *line,
                reason: format!("expected {dim} finite coordinates"),
            });
        }
    }
    Ok(PositionMatrix::from_fn(rows.len(), dim, |i, j| rows[i].1[j])?)
}

pub fn write_positions(path: &Path, x: &PositionMatrix) -> AppResult<()> {
    write_matrix(path, x.as_matrix())
}

pub fn write_diagnostics(path: &Path, history: &[IterationRecord]) -> AppResult<()> {
    write_records(
        path,
        Some(&["iteration", "cost", "rmse"]),
        history
            .iter()
            .map(|r| [r.iteration.to_string(), fmt_f64(r.cost), fmt_f64(r.rmse)]),
    )
}

/// `ω, Γ` per line (rad/s); an optional header line is skipped.
pub fn read_coherence_curve(path: &Path, speed_of_sound: f64) -> AppResult<CoherenceCurve> {
    let rows = read_rows(path, true)?;
    let mut omega = Vec::with_capacity(rows.len());
    let mut gamma = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.len() != 2 {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                line,
                reason: "expected two columns: omega, gamma".into(),
            });
        }
        omega.push(row[0]);
        gamma.push(row[1]);
    }
    Ok(CoherenceCurve::new(omega, gamma, speed_of_sound)?)
}

pub fn write_coherence_curve(path: &Path, curve: &CoherenceCurve) -> AppResult<()> {
    write_records(
        path,
        Some(&["omega", "gamma"]),
        curve
            .omega()
            .iter()
            .zip(curve.gamma())
            .map(|(&w, &g)| [fmt_f64(w), fmt_f64(g)]),
    )
}

pub const BOUND_REPORT_HEADER: [&str; 18] = [
    "trial",
    "seed",
    "a",
    "n",
    "p",
    "varsigma",
    "d_max",
    "q_min",
    "q_max",
    "mu1",
    "mu2",
    "kappa_eta",
    "bound_term1",
    "bound_term2",
    "structured_norm",
    "noise_norm",
    "structured_ratio",
    "noise_ratio",
];

pub fn write_bound_reports(path: &Path, reports: &[BoundReport]) -> AppResult<()> {
    write_records(
        path,
        Some(&BOUND_REPORT_HEADER),
        reports.iter().map(|r| {
            [
                r.trial.to_string(),
                r.seed.to_string(),
                fmt_f64(r.a),
                r.n.to_string(),
                fmt_f64(r.p),
                fmt_f64(r.varsigma),
                fmt_f64(r.d_max),
                fmt_f64(r.q_min),
                fmt_f64(r.q_max),
                fmt_f64(r.mu1),
                fmt_f64(r.mu2),
                fmt_f64(r.kappa_eta),
                fmt_f64(r.bound_term1),
                fmt_f64(r.bound_term2),
                fmt_f64(r.structured_norm),
                fmt_f64(r.noise_norm),
                fmt_f64(r.structured_ratio),
                fmt_f64(r.noise_ratio),
            ]
        }),
    )
}

/// Generic table writer used by the harness.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> AppResult<()> {
    write_records(path, Some(header), rows.iter().cloned())
}
