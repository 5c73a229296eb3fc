//! Normalized ground-truth files and conversion from raw annotation tables.
//!
//! The normalized format has one frame per line, `t_ms x y z speaking`,
//! separated by single spaces; `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use srcloc_core::geometry::{Position, RigidTransform};
use srcloc_core::realdata::{GroundTruthRecord, GroundTruthTrack, FRAME_SHIFT_MS};

use crate::error::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses normalized ground truth text; `origin` names the source in errors.
pub fn parse_ground_truth_str(text: &str, origin: &Path) -> Result<GroundTruthTrack> {
    let mut records = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let err = |m: String| Error::format(origin, format!("line {}: {m}", no + 1));
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields `t_ms x y z speaking`, found {}", f.len())));
        }
        let t_ms: u64 = f[0].parse().map_err(|_| err(format!("bad time {:?}", f[0])))?;
        let mut c = [0.0; 3];
        for k in 0..3 {
            c[k] = f[k + 1].parse().map_err(|_| err(format!("bad coordinate {:?}", f[k + 1])))?;
        }
        let speaking = match f[4] {
            "1" => true,
            "0" => false,
            other => return Err(err(format!("speaking flag must be 0 or 1, found {other:?}"))),
        };
        if let Some(prev) = records.last().map(|r: &GroundTruthRecord| r.t_ms) {
            if t_ms <= prev {
                return Err(err(format!("time {t_ms} ms does not follow {prev} ms")));
            }
        }
        records.push(GroundTruthRecord {
            t_ms,
            position: Position::from_array(c),
            speaking,
        });
    }
    GroundTruthTrack::new(records).map_err(|e| Error::format(origin, e.to_string()))
}

/// Reads a normalized ground-truth file and maps it through `transform`.
pub fn parse_ground_truth(path: &Path, transform: Option<&RigidTransform>) -> Result<GroundTruthTrack> {
    let track = parse_ground_truth_str(&read_text(path)?, path)?;
    Ok(match transform {
        Some(t) => track.transformed(t),
        None => track,
    })
}

pub fn format_ground_truth(track: &GroundTruthTrack) -> String {
    let mut s = String::new();
    for r in track.records() {
        let p = r.position;
        let _ = writeln!(s, "{} {} {} {} {}", r.t_ms, p.x, p.y, p.z, r.speaking as u8);
    }
    s
}

pub fn write_ground_truth(path: &Path, track: &GroundTruthTrack) -> Result<()> {
    std::fs::write(path, format_ground_truth(track)).map_err(|e| Error::io(path, e))
}

/// Meaning of one raw column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Time,
    X,
    Y,
    Z,
    Speaking,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[default]
    Ms,
    S,
    /// Frame index; multiplied by `frame_ms`.
    Frame,
}

/// How to read a raw annotation table. Every raw column must be given a
/// role, so unexpected columns are caught instead of silently dropped.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationMapping {
    pub columns: Vec<ColumnRole>,
    /// Field separator; whitespace when absent.
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default)]
    pub skip_lines: usize,
    #[serde(default)]
    pub time_unit: TimeUnit,
    #[serde(default = "default_frame_ms")]
    pub frame_ms: f64,
    /// Multiplies raw coordinates, e.g. 0.001 for millimeters.
    #[serde(default = "one")]
    pub scale: f64,
    /// Rotation about +z from the raw frame into the room frame, degrees.
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub translation: [f64; 3],
    /// Output frame shift.
    #[serde(default = "default_shift")]
    pub target_shift_ms: u64,
}

fn default_frame_ms() -> f64 {
    FRAME_SHIFT_MS as f64
}

fn one() -> f64 {
    1.0
}

fn default_shift() -> u64 {
    FRAME_SHIFT_MS
}

impl AnnotationMapping {
    /// Reads the normalized layout unchanged.
    pub fn identity() -> Self {
        AnnotationMapping {
            columns: vec![ColumnRole::Time, ColumnRole::X, ColumnRole::Y, ColumnRole::Z, ColumnRole::Speaking],
            delimiter: None,
            skip_lines: 0,
            time_unit: TimeUnit::Ms,
            frame_ms: default_frame_ms(),
            scale: 1.0,
            yaw_deg: 0.0,
            translation: [0.0; 3],
            target_shift_ms: FRAME_SHIFT_MS,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = toml::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for role in [ColumnRole::Time, ColumnRole::X, ColumnRole::Y, ColumnRole::Z] {
            let n = self.columns.iter().filter(|&&r| r == role).count();
            if n != 1 {
                return Err(Error::Config(format!("mapping must assign {role:?} to exactly one column, found {n}")));
            }
        }
        if self.columns.iter().filter(|&&r| r == ColumnRole::Speaking).count() > 1 {
            return Err(Error::Config("more than one speaking column".into()));
        }
        if self.target_shift_ms == 0 || !(self.scale.is_finite() && self.scale != 0.0) {
            return Err(Error::Config("target shift and scale must be non-zero".into()));
        }
        Ok(())
    }

    fn transform(&self) -> RigidTransform {
        RigidTransform {
            yaw: self.yaw_deg.to_radians(),
            translation: Position::from_array(self.translation),
        }
    }
}

/// Outcome of a conversion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConversionReport {
    pub input_rows: usize,
    pub output_rows: usize,
    /// Median raw time step, ms.
    pub raw_shift_ms: Option<f64>,
    pub resampled: bool,
    pub warnings: Vec<String>,
}

impl ConversionReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "input rows: {}\noutput rows: {}\nraw frame shift: {}\nresampled: {}\n",
            self.input_rows,
            self.output_rows,
            self.raw_shift_ms.map_or("n/a".into(), |v| format!("{v} ms")),
            self.resampled
        );
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

struct RawRow {
    t_ms: f64,
    pos: Position,
    speaking: bool,
}

/// Converts a raw annotation table into the normalized format.
///
/// When the raw frame shift differs from the target shift, each output
/// frame on the target grid takes the nearest raw frame within half a
/// target step; frames with no raw neighbor are omitted (no interpolation).
pub fn convert_annotations(raw: &str, origin: &Path, mapping: &AnnotationMapping) -> Result<(GroundTruthTrack, ConversionReport)> {
    mapping.validate()?;
    let mut rows = Vec::new();
    let col = |role| mapping.columns.iter().position(|&r| r == role);
    let (ti, xi, yi, zi) = (
        col(ColumnRole::Time).unwrap_or(0),
        col(ColumnRole::X).unwrap_or(0),
        col(ColumnRole::Y).unwrap_or(0),
        col(ColumnRole::Z).unwrap_or(0),
    );
    let si = col(ColumnRole::Speaking);
    let t = mapping.transform();
    for (no, line) in raw.lines().enumerate().skip(mapping.skip_lines) {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = match mapping.delimiter {
            Some(d) => body.split(d).map(str::trim).collect(),
            None => body.split_whitespace().collect(),
        };
        let err = |m: String| Error::format(origin, format!("line {}: {m}", no + 1));
        if fields.len() > mapping.columns.len() {
            return Err(err(format!(
                "unmapped columns {}..={} (mapping declares {})",
                mapping.columns.len() + 1,
                fields.len(),
                mapping.columns.len()
            )));
        }
        if fields.len() < mapping.columns.len() {
            return Err(err(format!("{} columns, mapping declares {}", fields.len(), mapping.columns.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| err(format!("column {} is not a number: {:?}", i + 1, fields[i])))
        };
        let raw_t = num(ti)?;
        let t_ms = match mapping.time_unit {
            TimeUnit::Ms => raw_t,
            TimeUnit::S => raw_t * 1000.0,
            TimeUnit::Frame => raw_t * mapping.frame_ms,
        };
        let p = Position::new(num(xi)? * mapping.scale, num(yi)? * mapping.scale, num(zi)? * mapping.scale);
        let speaking = match si {
            Some(i) => num(i)? != 0.0,
            None => true,
        };
        if let Some(prev) = rows.last().map(|r: &RawRow| r.t_ms) {
            if t_ms <= prev {
                return Err(err(format!("time {t_ms} ms does not follow {prev} ms")));
            }
        }
        if t_ms < 0.0 || !t_ms.is_finite() {
            return Err(err(format!("invalid time {t_ms}")));
        }
        rows.push(RawRow {
            t_ms,
            pos: t.apply(p),
            speaking,
        });
    }
    let mut report = ConversionReport {
        input_rows: rows.len(),
        ..Default::default()
    };
    let shift = mapping.target_shift_ms as f64;
    let mut steps: Vec<f64> = rows.windows(2).map(|w| w[1].t_ms - w[0].t_ms).collect();
    steps.sort_by(f64::total_cmp);
    report.raw_shift_ms = steps.get(steps.len() / 2).copied();
    let on_grid = rows.iter().all(|r| r.t_ms.fract() == 0.0 && (r.t_ms as u64).is_multiple_of(mapping.target_shift_ms));
    let regular = report.raw_shift_ms.is_none_or(|s| (s - shift).abs() < 1e-9);
    let records: Vec<GroundTruthRecord> = if on_grid && regular {
        rows.iter()
            .map(|r| GroundTruthRecord {
                t_ms: r.t_ms as u64,
                position: r.pos,
                speaking: r.speaking,
            })
            .collect()
    } else {
        report.resampled = true;
        report.warnings.push(format!(
            "raw frame shift {} ms differs from the target {} ms; resampled to the nearest raw frame",
            report.raw_shift_ms.unwrap_or(f64::NAN),
            mapping.target_shift_ms
        ));
        let mut out = Vec::new();
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            let mut k = (first.t_ms / shift).ceil() as u64;
            let mut j = 0;
            while (k as f64) * shift <= last.t_ms {
                let tk = k as f64 * shift;
                while j + 1 < rows.len() && (rows[j + 1].t_ms - tk).abs() <= (rows[j].t_ms - tk).abs() {
                    j += 1;
                }
                if (rows[j].t_ms - tk).abs() <= shift / 2.0 {
                    out.push(GroundTruthRecord {
                        t_ms: k * mapping.target_shift_ms,
                        position: rows[j].pos,
                        speaking: rows[j].speaking,
                    });
                }
                k += 1;
            }
        }
        out
    };
    report.output_rows = records.len();
    let track = GroundTruthTrack::new(records).map_err(|e| Error::format(origin, e.to_string()))?;
    Ok((track, report))
}
