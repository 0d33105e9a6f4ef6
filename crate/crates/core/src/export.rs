//! CSV emission and parsing for every tabular output.
//!
//! Floats are written with 17 significant digits, so reading a file back
//! reproduces the written values exactly. Missing values are `NaN`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::experiments::{LyapunovRow, ScanRecord, SweepRow, TraceRow};
use crate::linearization::DenseMatrix;
use crate::quantizer::Orbit;
use crate::stability::StabilityReport;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(csv::Error),
    #[error("line {line}: cannot parse {field:?}")]
    Parse { line: usize, field: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { expected: String, found: String },
}

impl From<csv::Error> for ExportError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                return ExportError::Io(io);
            }
            unreachable!("is_io_error implies an Io kind");
        }
        ExportError::Csv(e)
    }
}

pub type ExportResult<T> = std::result::Result<T, ExportError>;

/// `{:.16e}` formatting: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn write_table<W: Write>(
    w: W,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> ExportResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn strs(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn read_table<R: Read>(r: R, header: &[String]) -> ExportResult<Vec<csv::StringRecord>> {
    let mut input = csv::Reader::from_reader(r);
    let found = input.headers()?.clone();
    if found.iter().ne(header.iter().map(String::as_str)) {
        return Err(ExportError::Header {
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(input.records().collect::<Result<_, _>>()?)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> ExportResult<T> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let raw = rec.get(i).ok_or_else(|| ExportError::Parse {
        line,
        field: format!("<column {i}>"),
    })?;
    raw.parse().map_err(|_| ExportError::Parse {
        line,
        field: raw.to_string(),
    })
}

pub const ORBIT_HEADER: [&str; 5] = ["t", "j", "angle", "residual", "distortion"];

/// One row per codepoint per state; the residual of the final state is NaN.
pub fn write_orbit<W: Write>(w: W, orbit: &Orbit) -> ExportResult<()> {
    let rows = orbit.states.iter().enumerate().flat_map(|(t, state)| {
        let residual = orbit.residuals.get(t).copied().unwrap_or(f64::NAN);
        let distortion = orbit.distortions.get(t).copied().unwrap_or(f64::NAN);
        state.points().iter().enumerate().map(move |(j, &q)| {
            vec![
                t.to_string(),
                j.to_string(),
                fmt_f64(q),
                fmt_f64(residual),
                fmt_f64(distortion),
            ]
        })
    });
    write_table(w, &strs(&ORBIT_HEADER), rows)
}

pub const SWEEP_HEADER: [&str; 4] = ["kappa", "t", "j", "angle"];

/// A sweep line as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepLine {
    Point { kappa: f64, t: usize, j: usize, angle: f64 },
    /// Written as `kappa,-1,-1,NaN`.
    Failed { kappa: f64 },
}

impl From<&SweepRow> for SweepLine {
    fn from(row: &SweepRow) -> Self {
        match row {
            SweepRow::Record(r) => SweepLine::Point {
                kappa: r.kappa,
                t: r.t,
                j: r.j,
                angle: r.angle,
            },
            SweepRow::Failed { kappa, .. } => SweepLine::Failed { kappa: *kappa },
        }
    }
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> ExportResult<()> {
    let lines = rows.iter().map(|row| match SweepLine::from(row) {
        SweepLine::Point { kappa, t, j, angle } => {
            vec![fmt_f64(kappa), t.to_string(), j.to_string(), fmt_f64(angle)]
        }
        SweepLine::Failed { kappa } => {
            vec![fmt_f64(kappa), "-1".into(), "-1".into(), fmt_f64(f64::NAN)]
        }
    });
    write_table(w, &strs(&SWEEP_HEADER), lines)
}

pub fn read_sweep<R: Read>(r: R) -> ExportResult<Vec<SweepLine>> {
    read_table(r, &strs(&SWEEP_HEADER))?
        .iter()
        .map(|rec| {
            let kappa = field(rec, 0)?;
            if field::<i64>(rec, 1)? < 0 {
                return Ok(SweepLine::Failed { kappa });
            }
            Ok(SweepLine::Point {
                kappa,
                t: field(rec, 1)?,
                j: field(rec, 2)?,
                angle: field(rec, 3)?,
            })
        })
        .collect()
}

pub const EIGEN_HEADER: [&str; 4] = ["kappa", "lambda_min", "F", "bound"];

pub fn write_eigen<W: Write>(w: W, rows: &[ScanRecord]) -> ExportResult<()> {
    let lines = rows
        .iter()
        .map(|r| vec![fmt_f64(r.kappa), fmt_f64(r.lambda_min), fmt_f64(r.f), fmt_f64(r.bound)]);
    write_table(w, &strs(&EIGEN_HEADER), lines)
}

pub fn read_eigen<R: Read>(r: R) -> ExportResult<Vec<ScanRecord>> {
    read_table(r, &strs(&EIGEN_HEADER))?
        .iter()
        .map(|rec| {
            Ok(ScanRecord {
                kappa: field(rec, 0)?,
                lambda_min: field(rec, 1)?,
                f: field(rec, 2)?,
                bound: field(rec, 3)?,
            })
        })
        .collect()
}

pub const FSCAN_HEADER: [&str; 4] = ["kappa", "lambda_min", "lower_boundary", "upper_reference"];

/// The smallest eigenvalue against the fixed references −1 and +1.
pub fn write_fscan<W: Write>(w: W, rows: &[ScanRecord]) -> ExportResult<()> {
    let lines = rows
        .iter()
        .map(|r| vec![fmt_f64(r.kappa), fmt_f64(r.lambda_min), fmt_f64(-1.0), fmt_f64(1.0)]);
    write_table(w, &strs(&FSCAN_HEADER), lines)
}

pub fn read_fscan<R: Read>(r: R) -> ExportResult<Vec<[f64; 4]>> {
    read_table(r, &strs(&FSCAN_HEADER))?
        .iter()
        .map(|rec| Ok([field(rec, 0)?, field(rec, 1)?, field(rec, 2)?, field(rec, 3)?]))
        .collect()
}

pub fn lyapunov_header(n: usize) -> Vec<String> {
    std::iter::once("kappa".to_string())
        .chain((1..=n).map(|i| format!("lambda_{i}")))
        .collect()
}

/// Failed κ values are written with every exponent NaN.
pub fn write_lyapunov<W: Write>(w: W, n: usize, rows: &[LyapunovRow]) -> ExportResult<()> {
    let lines = rows.iter().map(|row| {
        let mut line = vec![fmt_f64(row.kappa)];
        match &row.report {
            Some(r) => line.extend(r.exponents.iter().map(|&e| fmt_f64(e))),
            None => line.extend((0..n).map(|_| fmt_f64(f64::NAN))),
        }
        line
    });
    write_table(w, &lyapunov_header(n), lines)
}

pub fn read_lyapunov<R: Read>(r: R, n: usize) -> ExportResult<Vec<(f64, Vec<f64>)>> {
    read_table(r, &lyapunov_header(n))?
        .iter()
        .map(|rec| {
            let exps = (1..=n).map(|i| field(rec, i)).collect::<ExportResult<_>>()?;
            Ok((field(rec, 0)?, exps))
        })
        .collect()
}

pub const TRACE_HEADER: [&str; 4] = ["t", "residual", "rho", "perturbed"];

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> ExportResult<()> {
    let lines = rows.iter().map(|r| {
        vec![
            r.t.to_string(),
            fmt_f64(r.residual),
            fmt_f64(r.rho),
            u8::from(r.perturbed).to_string(),
        ]
    });
    write_table(w, &strs(&TRACE_HEADER), lines)
}

pub fn read_trace<R: Read>(r: R) -> ExportResult<Vec<TraceRow>> {
    read_table(r, &strs(&TRACE_HEADER))?
        .iter()
        .map(|rec| {
            Ok(TraceRow {
                t: field(rec, 0)?,
                residual: field(rec, 1)?,
                rho: field(rec, 2)?,
                perturbed: field::<u8>(rec, 3)? == 1,
            })
        })
        .collect()
}

pub const STABILITY_HEADER: [&str; 7] =
    ["n", "kappa", "F", "bound", "m_star", "lambda_min", "verdict"];

pub fn write_stability<W: Write>(w: W, rows: &[StabilityReport]) -> ExportResult<()> {
    let lines = rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            fmt_f64(r.kappa.unwrap_or(f64::NAN)),
            fmt_f64(r.f),
            fmt_f64(r.bound),
            r.m_star.to_string(),
            fmt_f64(r.lambda_min),
            r.verdict.as_str().to_string(),
        ]
    });
    write_table(w, &strs(&STABILITY_HEADER), lines)
}

pub fn matrix_header(cols: usize) -> Vec<String> {
    (0..cols).map(|k| format!("c{k}")).collect()
}

pub fn write_matrix<W: Write>(w: W, m: &DenseMatrix) -> ExportResult<()> {
    let lines = (0..m.rows()).map(|i| m.row(i).iter().map(|&x| fmt_f64(x)).collect());
    write_table(w, &matrix_header(m.cols()), lines)
}

pub fn read_matrix<R: Read>(r: R, cols: usize) -> ExportResult<Vec<Vec<f64>>> {
    read_table(r, &matrix_header(cols))?
        .iter()
        .map(|rec| (0..cols).map(|k| field(rec, k)).collect())
        .collect()
}
