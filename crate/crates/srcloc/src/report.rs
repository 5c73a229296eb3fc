//! CSV and text output of tracks and result matrices, plus the published
//! reference numbers shipped with the crate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srcloc_core::geometry::Position;
use srcloc_core::metrics::{FrameRecord, ResultCell, ResultMatrix, TrackReport, AVERAGE_ROW};

use crate::error::{Error, Result};

/// Published MOTP and relative improvement values, one row per cell.
pub const REFERENCE_TABLES_CSV: &str = include_str!("../data/reference_tables.csv");

#[derive(Debug, Serialize, Deserialize)]
struct TrackRow {
    t_ms: u64,
    est_x: f64,
    est_y: f64,
    est_z: f64,
    gt_x: f64,
    gt_y: f64,
    gt_z: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::format(path, e.to_string()),
    }
}

/// File name of a track report: `<sequence>__<method>__<ms>ms.csv`.
pub fn track_file_name(report: &TrackReport) -> String {
    format!("{}__{}__{}ms.csv", report.sequence, report.method, report.window_ms)
}

pub fn write_track_csv(path: &Path, report: &TrackReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for f in report.frames() {
        w.serialize(TrackRow {
            t_ms: f.t_ms,
            est_x: f.estimate.x,
            est_y: f.estimate.y,
            est_z: f.estimate.z,
            gt_x: f.truth.x,
            gt_y: f.truth.y,
            gt_z: f.truth.z,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    if report.is_empty() {
        w.write_record(["t_ms", "est_x", "est_y", "est_z", "gt_x", "gt_y", "gt_z"])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a track report; sequence, method and window come from the file name.
pub fn read_track_csv(path: &Path) -> Result<TrackReport> {
    let stem = path
        .file_name()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_suffix("ms.csv"))
        .ok_or_else(|| Error::format(path, "expected a name like <sequence>__<method>__<ms>ms.csv"))?;
    let parts: Vec<&str> = stem.split("__").collect();
    let (seq, method, ms) = match parts.as_slice() {
        [s, m, w] => (*s, *m, w.parse::<u32>().map_err(|_| Error::format(path, "bad window length in name"))?),
        _ => return Err(Error::format(path, "expected a name like <sequence>__<method>__<ms>ms.csv")),
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut frames = Vec::new();
    for row in r.deserialize() {
        let row: TrackRow = row.map_err(|e| csv_err(path, e))?;
        frames.push(FrameRecord {
            t_ms: row.t_ms,
            estimate: Position::new(row.est_x, row.est_y, row.est_z),
            truth: Position::new(row.gt_x, row.gt_y, row.gt_z),
        });
    }
    TrackReport::new(seq, method, ms, frames).map_err(|e| Error::format(path, e.to_string()))
}

/// Track reports in `dir` (files ending in `ms.csv`), sorted by name.
pub fn read_track_dir(dir: &Path) -> Result<Vec<TrackReport>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with("ms.csv")) && p.to_str().is_some_and(|s| s.contains("__")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_track_csv(p)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixRow {
    sequence: String,
    method: String,
    window_ms: u32,
    motp_m: String,
    delta_r_pct: String,
}

pub fn matrix_csv(m: &ResultMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for seq in m.rows() {
        for &ms in &m.windows_ms {
            for method in &m.methods {
                if let Some(c) = m.cell(&seq, method, ms) {
                    w.serialize(MatrixRow {
                        sequence: seq.clone(),
                        method: method.clone(),
                        window_ms: ms,
                        motp_m: format!("{:.6}", c.motp),
                        delta_r_pct: c.delta_r.map(|d| format!("{d:.3}")).unwrap_or_default(),
                    })
                    .expect("in-memory write");
                }
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_matrix_csv(path: &Path, m: &ResultMatrix) -> Result<()> {
    std::fs::write(path, matrix_csv(m)).map_err(|e| Error::io(path, e))
}

/// One SRP estimate per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrpFrame {
    pub frame_ms: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub power: f64,
}

pub fn write_srp_csv(path: &Path, frames: &[SrpFrame]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for f in frames {
        w.serialize(f).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Aligned text rendering: a column group per window length, two lines per
/// row (MOTP, then relative improvement).
pub fn render_table(m: &ResultMatrix) -> String {
    let label_w = m.rows().iter().map(|r| r.len()).max().unwrap_or(0).max(8) + 10;
    let col_w: Vec<usize> = m.methods.iter().map(|s| s.len().max(7) + 2).collect();
    let group_w: usize = col_w.iter().sum();
    let mut s = String::new();
    let _ = write!(s, "{:label_w$}", "");
    for ms in &m.windows_ms {
        let _ = write!(s, "|{:^group_w$}", format!("{ms} ms"));
    }
    s.push('\n');
    let _ = write!(s, "{:label_w$}", "");
    for _ in &m.windows_ms {
        s.push('|');
        for (method, w) in m.methods.iter().zip(&col_w) {
            let _ = write!(s, "{method:>w$}");
        }
    }
    s.push('\n');
    let rule = "-".repeat(label_w + (group_w + 1) * m.windows_ms.len());
    s.push_str(&rule);
    s.push('\n');
    for row in m.rows() {
        let _ = write!(s, "{:label_w$}", format!("{row} MOTP(m)"));
        for &ms in &m.windows_ms {
            s.push('|');
            for (method, w) in m.methods.iter().zip(&col_w) {
                let v = m.cell(&row, method, ms).map(|c| format!("{:.3}", c.motp)).unwrap_or_default();
                let _ = write!(s, "{v:>w$}");
            }
        }
        s.push('\n');
        let _ = write!(s, "{:label_w$}", format!("{:w$} dr(%)", "", w = row.len()));
        for &ms in &m.windows_ms {
            s.push('|');
            for (method, w) in m.methods.iter().zip(&col_w) {
                let v = m
                    .cell(&row, method, ms)
                    .and_then(|c| c.delta_r)
                    .map(|d| format!("{d:.1}%"))
                    .unwrap_or_default();
                let _ = write!(s, "{v:>w$}");
            }
        }
        s.push('\n');
    }
    s.lines().map(|l| format!("{}\n", l.trim_end())).collect()
}

/// One published cell.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceCell {
    pub table: u32,
    pub sequence: String,
    pub method: String,
    pub window_ms: u32,
    pub motp_m: f64,
    pub delta_r_pct: Option<f64>,
}

pub fn reference_cells() -> Vec<ReferenceCell> {
    let mut r = csv::Reader::from_reader(REFERENCE_TABLES_CSV.as_bytes());
    r.deserialize().map(|row| row.expect("shipped reference table parses")).collect()
}

/// Published table `table` as a matrix carrying the printed Δr values.
pub fn reference_matrix(table: u32) -> Option<ResultMatrix> {
    let cells: Vec<ResultCell> = reference_cells()
        .into_iter()
        .filter(|c| c.table == table)
        .map(|c| ResultCell {
            sequence: c.sequence,
            method: c.method,
            window_ms: c.window_ms,
            motp: c.motp_m,
            delta_r: c.delta_r_pct,
            frames: 0,
        })
        .collect();
    if cells.is_empty() {
        return None;
    }
    ResultMatrix::from_cells(cells, None, None).ok()
}

/// Adds the published cells of `table` for `methods` as extra columns
/// named `<method> (published)`, restricted to sequences and window lengths
/// present in `ours`.
pub fn with_reference_columns(ours: &ResultMatrix, table: u32, methods: &[&str]) -> Result<ResultMatrix> {
    let mut cells = ours.cells.clone();
    let mut out_methods = Vec::new();
    for c in reference_cells() {
        if c.table != table || !methods.contains(&c.method.as_str()) || !ours.windows_ms.contains(&c.window_ms) {
            continue;
        }
        if c.sequence != AVERAGE_ROW && !ours.sequences.contains(&c.sequence) {
            continue;
        }
        let name = format!("{} (published)", c.method);
        if !out_methods.contains(&name) {
            out_methods.push(name.clone());
        }
        cells.push(ResultCell {
            sequence: c.sequence,
            method: name,
            window_ms: c.window_ms,
            motp: c.motp_m,
            delta_r: c.delta_r_pct,
            frames: 0,
        });
    }
    let mut m = ours.clone();
    out_methods.extend(ours.methods.iter().cloned());
    m.methods = out_methods;
    m.cells = cells;
    Ok(m)
}
