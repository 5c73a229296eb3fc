//! Tracking precision and the per-sequence result matrix.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::geometry::{euclidean_distance, Position};
use crate::{Error, Result};

/// How per-frame errors are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotpMode {
    /// Mean Euclidean distance, in meters.
    #[default]
    Euclidean,
    /// Mean squared distance, in square meters.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub t_ms: u64,
    pub estimate: Position,
    pub truth: Position,
}

/// Estimates of one method on one sequence at one window length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackReport {
    pub sequence: String,
    pub method: String,
    pub window_ms: u32,
    frames: Vec<FrameRecord>,
}

impl TrackReport {
    /// Validates strictly increasing frame times.
    pub fn new(sequence: &str, method: &str, window_ms: u32, frames: Vec<FrameRecord>) -> Result<Self> {
        if let Some(w) = frames.windows(2).find(|w| w[0].t_ms >= w[1].t_ms) {
            return Err(Error::InvalidReport(format!(
                "{sequence}/{method}: frame time {} ms does not follow {} ms",
                w[1].t_ms, w[0].t_ms
            )));
        }
        Ok(TrackReport {
            sequence: sequence.to_string(),
            method: method.to_string(),
            window_ms,
            frames,
        })
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Keeps only frames whose time appears in `keep` (sorted ascending).
    pub fn retain_times(&mut self, keep: &[u64]) {
        self.frames.retain(|f| keep.binary_search(&f.t_ms).is_ok());
    }

    pub fn times(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.t_ms).collect()
    }
}

/// Mean localization error over the frames of `report`.
pub fn motp(report: &TrackReport, mode: MotpMode) -> Result<f64> {
    if report.frames.is_empty() {
        return Err(Error::EmptyReport);
    }
    let sum: f64 = report
        .frames
        .iter()
        .map(|f| {
            let d = euclidean_distance(f.estimate, f.truth);
            match mode {
                MotpMode::Euclidean => d,
                MotpMode::Squared => d * d,
            }
        })
        .sum();
    Ok(sum / report.frames.len() as f64)
}

/// Improvement of `proposal` over `reference` in percent; positive when the
/// proposal has the smaller error.
pub fn relative_improvement(reference: f64, proposal: f64) -> Result<f64> {
    if reference.is_nan() || reference <= 0.0 || !reference.is_finite() {
        return Err(Error::ZeroReference(reference));
    }
    Ok(100.0 * (reference - proposal) / reference)
}

/// Restricts every report to the frames present in all of them, so frames
/// one method could not estimate are excluded for every method.
pub fn restrict_to_common_frames(reports: &mut [TrackReport]) {
    let Some(first) = reports.first() else {
        return;
    };
    let mut common = first.times();
    for r in reports.iter().skip(1) {
        let t = r.times();
        common.retain(|x| t.binary_search(x).is_ok());
    }
    for r in reports.iter_mut() {
        r.retain_times(&common);
    }
}

/// How the "Average" row combines sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AverageMode {
    /// Every frame of every sequence weighs the same.
    #[default]
    Pooled,
    /// Every sequence weighs the same.
    Arithmetic,
}

pub const AVERAGE_ROW: &str = "Average";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultCell {
    pub sequence: String,
    pub method: String,
    pub window_ms: u32,
    pub motp: f64,
    /// Relative improvement over the reference method; `None` for the
    /// reference itself or when it is absent.
    pub delta_r: Option<f64>,
    pub frames: usize,
}

/// Cells for sequences × methods × window lengths plus an average row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultMatrix {
    pub sequences: Vec<String>,
    pub methods: Vec<String>,
    pub windows_ms: Vec<u32>,
    pub reference: Option<String>,
    pub cells: Vec<ResultCell>,
}

fn push_unique<T: PartialEq + Clone>(v: &mut Vec<T>, x: &T) {
    if !v.contains(x) {
        v.push(x.clone());
    }
}

impl ResultMatrix {
    /// Builds the matrix from track reports, in first-seen order of
    /// sequences, methods and window lengths.
    pub fn from_reports(
        reports: &[TrackReport],
        reference: Option<&str>,
        mode: MotpMode,
        average: AverageMode,
    ) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyReport);
        }
        let (mut sequences, mut methods, mut windows_ms) = (Vec::new(), Vec::new(), Vec::new());
        for r in reports {
            if r.sequence == AVERAGE_ROW {
                return Err(Error::InvalidReport(format!("sequence id {AVERAGE_ROW:?} is reserved")));
            }
            push_unique(&mut sequences, &r.sequence);
            push_unique(&mut methods, &r.method);
            push_unique(&mut windows_ms, &r.window_ms);
        }
        let mut cells: Vec<ResultCell> = Vec::new();
        for r in reports {
            if cells
                .iter()
                .any(|c| c.sequence == r.sequence && c.method == r.method && c.window_ms == r.window_ms)
            {
                return Err(Error::InvalidReport(format!(
                    "duplicate report for {}/{}/{} ms",
                    r.sequence, r.method, r.window_ms
                )));
            }
            cells.push(ResultCell {
                sequence: r.sequence.clone(),
                method: r.method.clone(),
                window_ms: r.window_ms,
                motp: motp(r, mode)?,
                delta_r: None,
                frames: r.len(),
            });
        }
        let mut matrix = ResultMatrix {
            sequences,
            methods,
            windows_ms,
            reference: reference.map(|s| s.to_string()),
            cells,
        };
        if matrix.sequences.len() > 1 {
            matrix.add_average_row(average);
        }
        matrix.fill_delta_r()?;
        Ok(matrix)
    }

    /// Builds a matrix directly from MOTP values, e.g. published ones.
    pub fn from_cells(cells: Vec<ResultCell>, reference: Option<&str>, average: Option<AverageMode>) -> Result<Self> {
        let (mut sequences, mut methods, mut windows_ms) = (Vec::new(), Vec::new(), Vec::new());
        for c in &cells {
            if c.sequence != AVERAGE_ROW {
                push_unique(&mut sequences, &c.sequence);
            }
            push_unique(&mut methods, &c.method);
            push_unique(&mut windows_ms, &c.window_ms);
        }
        let mut matrix = ResultMatrix {
            sequences,
            methods,
            windows_ms,
            reference: reference.map(|s| s.to_string()),
            cells,
        };
        if let Some(avg) = average {
            matrix.add_average_row(avg);
        }
        matrix.fill_delta_r()?;
        Ok(matrix)
    }

    fn add_average_row(&mut self, average: AverageMode) {
        self.cells.retain(|c| c.sequence != AVERAGE_ROW);
        let mut rows = Vec::new();
        for m in &self.methods {
            for &w in &self.windows_ms {
                let group: Vec<&ResultCell> = self
                    .cells
                    .iter()
                    .filter(|c| &c.method == m && c.window_ms == w)
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let frames: usize = group.iter().map(|c| c.frames).sum();
                let value = match average {
                    AverageMode::Pooled if frames > 0 => {
                        group.iter().map(|c| c.motp * c.frames as f64).sum::<f64>() / frames as f64
                    }
                    _ => group.iter().map(|c| c.motp).sum::<f64>() / group.len() as f64,
                };
                rows.push(ResultCell {
                    sequence: AVERAGE_ROW.to_string(),
                    method: m.clone(),
                    window_ms: w,
                    motp: value,
                    delta_r: None,
                    frames,
                });
            }
        }
        self.cells.extend(rows);
    }

    fn fill_delta_r(&mut self) -> Result<()> {
        let Some(reference) = self.reference.clone() else {
            return Ok(());
        };
        let refs: Vec<(String, u32, f64)> = self
            .cells
            .iter()
            .filter(|c| c.method == reference)
            .map(|c| (c.sequence.clone(), c.window_ms, c.motp))
            .collect();
        for c in self.cells.iter_mut() {
            if c.method == reference {
                continue;
            }
            if let Some((_, _, r)) = refs.iter().find(|(s, w, _)| *s == c.sequence && *w == c.window_ms) {
                c.delta_r = Some(relative_improvement(*r, c.motp)?);
            }
        }
        Ok(())
    }

    /// Row labels: sequences, then the average row when present.
    pub fn rows(&self) -> Vec<String> {
        let mut rows = self.sequences.clone();
        if self.cells.iter().any(|c| c.sequence == AVERAGE_ROW) {
            rows.push(AVERAGE_ROW.to_string());
        }
        rows
    }

    pub fn cell(&self, sequence: &str, method: &str, window_ms: u32) -> Option<&ResultCell> {
        self.cells
            .iter()
            .find(|c| c.sequence == sequence && c.method == method && c.window_ms == window_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn report(errors: &[(f64, f64, f64)]) -> TrackReport {
        let frames = errors
            .iter()
            .enumerate()
            .map(|(i, &(x, y, z))| FrameRecord {
                t_ms: 40 * i as u64,
                estimate: Position::new(1.0 + x, 2.0 + y, 1.0 + z),
                truth: Position::new(1.0, 2.0, 1.0),
            })
            .collect();
        TrackReport::new("seq01", "CNN", 80, frames).unwrap()
    }

    #[test]
    fn two_frame_hand_example() {
        let r = report(&[(0.3, 0.0, 0.0), (0.0, 0.0, 0.5)]);
        assert!((motp(&r, MotpMode::Euclidean).unwrap() - 0.4).abs() < 1e-12);
        assert!((motp(&r, MotpMode::Squared).unwrap() - 0.17).abs() < 1e-12);
        assert_eq!(motp(&report(&[(0.0, 0.0, 0.0)]), MotpMode::Euclidean).unwrap(), 0.0);
        assert_eq!(motp(&report(&[]), MotpMode::Euclidean), Err(Error::EmptyReport));
    }

    #[test]
    fn relative_improvement_examples() {
        let d = relative_improvement(1.020, 0.795).unwrap();
        assert!((d - 22.0588).abs() < 1e-3);
        assert_eq!(libm::round(d * 10.0) / 10.0, 22.1);
        assert_eq!(relative_improvement(0.7, 0.7).unwrap(), 0.0);
        let d = relative_improvement(0.690, 1.379).unwrap();
        assert_eq!(libm::round(d * 10.0) / 10.0, -99.9);
        assert_eq!(relative_improvement(0.0, 1.0), Err(Error::ZeroReference(0.0)));
    }

    #[test]
    fn unordered_frames_rejected() {
        let f = FrameRecord {
            t_ms: 5,
            estimate: Position::new(0.0, 0.0, 0.0),
            truth: Position::new(0.0, 0.0, 0.0),
        };
        assert!(TrackReport::new("s", "m", 80, vec![f, f]).is_err());
    }

    #[test]
    fn common_frames_exclusion() {
        let mut a = report(&[(0.1, 0.0, 0.0), (0.2, 0.0, 0.0), (0.3, 0.0, 0.0)]);
        let mut b = a.clone();
        b.method = "SRP".into();
        b.frames.remove(1);
        a.method = "CNN".into();
        let mut both = [a, b];
        restrict_to_common_frames(&mut both);
        assert_eq!(both[0].times(), vec![0, 80]);
        assert_eq!(both[1].times(), vec![0, 80]);
    }

    fn cell(seq: &str, method: &str, motp: f64, frames: usize) -> ResultCell {
        ResultCell {
            sequence: seq.into(),
            method: method.into(),
            window_ms: 80,
            motp,
            delta_r: None,
            frames,
        }
    }

    #[test]
    fn single_cell_matrix() {
        let r = report(&[(0.3, 0.0, 0.0), (0.0, 0.0, 0.5)]);
        let m = ResultMatrix::from_reports(&[r], None, MotpMode::Euclidean, AverageMode::Pooled).unwrap();
        assert_eq!(m.cells.len(), 1);
        assert!((m.cells[0].motp - 0.4).abs() < 1e-12);
        assert_eq!(m.rows(), vec!["seq01".to_string()]);
    }

    #[test]
    fn average_rows_by_mode() {
        let cells = vec![
            cell("seq01", "SRP", 1.020, 2248),
            cell("seq02", "SRP", 0.960, 2411),
            cell("seq03", "SRP", 0.900, 2636),
            cell("seq01", "GMBF", 0.795, 2248),
            cell("seq02", "GMBF", 0.864, 2411),
            cell("seq03", "GMBF", 0.686, 2636),
        ];
        let pooled = ResultMatrix::from_cells(cells.clone(), Some("SRP"), Some(AverageMode::Pooled)).unwrap();
        let arith = ResultMatrix::from_cells(cells, Some("SRP"), Some(AverageMode::Arithmetic)).unwrap();
        let p = pooled.cell(AVERAGE_ROW, "SRP", 80).unwrap().motp;
        let a = arith.cell(AVERAGE_ROW, "SRP", 80).unwrap().motp;
        assert!((a - 0.96).abs() < 1e-12);
        assert!((p - 0.957).abs() < 5e-4, "{p}");
        let g = pooled.cell(AVERAGE_ROW, "GMBF", 80).unwrap();
        assert!((g.motp - 0.778).abs() < 5e-4);
        let d = pooled.cell("seq01", "GMBF", 80).unwrap().delta_r.unwrap();
        assert!((d - 22.06).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn motp_is_translation_invariant(
            errs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..20),
            shift in (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0),
        ) {
            let r = report(&errs);
            let s = Position::new(shift.0, shift.1, shift.2);
            let frames = r.frames().iter().map(|f| FrameRecord { t_ms: f.t_ms, estimate: f.estimate + s, truth: f.truth + s }).collect();
            let moved = TrackReport::new("seq01", "CNN", 80, frames).unwrap();
            for mode in [MotpMode::Euclidean, MotpMode::Squared] {
                let (a, b) = (motp(&r, mode).unwrap(), motp(&moved, mode).unwrap());
                prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
            }
        }

        #[test]
        fn euclidean_bounded_by_root_squared(errs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..20)) {
            let r = report(&errs);
            let e = motp(&r, MotpMode::Euclidean).unwrap();
            let s = motp(&r, MotpMode::Squared).unwrap();
            prop_assert!(e <= libm::sqrt(s) + 1e-12);
        }

        #[test]
        fn delta_r_sign(r in 0.01f64..5.0, p in 0.0f64..5.0) {
            let d = relative_improvement(r, p).unwrap();
            prop_assert_eq!(d > 0.0, p < r);
            prop_assert_eq!(relative_improvement(r, r).unwrap(), 0.0);
        }
    }

    #[test]
    fn equal_errors_meet_jensen_bound() {
        let r = report(&[(0.3, 0.0, 0.0), (0.0, -0.3, 0.0), (0.0, 0.0, 0.3)]);
        let e = motp(&r, MotpMode::Euclidean).unwrap();
        let s = motp(&r, MotpMode::Squared).unwrap();
        assert!((e - libm::sqrt(s)).abs() < 1e-12);
    }
}
