//! Recorded sequences: annotated speaker tracks and the labeled windows cut
//! from them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::geometry::{ArrayGeometry, Position, RigidTransform};
use crate::signal::MultichannelWindow;
use crate::{Error, Result};

/// Nominal spacing of annotated frames.
pub const FRAME_SHIFT_MS: u64 = 40;

/// Annotated frames of the reference recordings.
pub const TABLE2_FRAMES: [(&str, usize); 5] =
    [("seq01", 2248), ("seq02", 2411), ("seq03", 2636), ("seq11", 481), ("seq15", 436)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRecord {
    pub t_ms: u64,
    pub position: Position,
    pub speaking: bool,
}

/// Speaker mouth positions over time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthTrack {
    records: Vec<GroundTruthRecord>,
}

impl GroundTruthTrack {
    /// Validates strictly increasing times and finite positions.
    pub fn new(records: Vec<GroundTruthRecord>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !r.position.is_finite() {
                return Err(Error::GroundTruth(format!("record {} at {} ms has a non-finite position", i + 1, r.t_ms)));
            }
            if i > 0 && records[i - 1].t_ms >= r.t_ms {
                return Err(Error::GroundTruth(format!(
                    "record {}: time {} ms does not follow {} ms",
                    i + 1,
                    r.t_ms,
                    records[i - 1].t_ms
                )));
            }
        }
        Ok(GroundTruthTrack { records })
    }

    pub fn records(&self) -> &[GroundTruthRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn speaking(&self) -> impl Iterator<Item = &GroundTruthRecord> {
        self.records.iter().filter(|r| r.speaking)
    }

    /// Maps every position through `t` (e.g. array frame to room frame).
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        GroundTruthTrack {
            records: self
                .records
                .iter()
                .map(|r| GroundTruthRecord {
                    position: t.apply(r.position),
                    ..*r
                })
                .collect(),
        }
    }

    /// Times of records outside the room, reported rather than clamped.
    pub fn outside_room(&self, geom: &ArrayGeometry) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| !geom.contains(r.position))
            .map(|r| r.t_ms)
            .collect()
    }

    /// Time steps that differ from the nominal shift.
    pub fn irregular_steps(&self, shift_ms: u64) -> Vec<u64> {
        self.records
            .windows(2)
            .filter(|w| w[1].t_ms - w[0].t_ms != shift_ms)
            .map(|w| w[1].t_ms)
            .collect()
    }
}

/// A window cut from a recorded sequence, labeled with the annotated position.
#[derive(Debug, Clone, PartialEq)]
pub struct RealWindow {
    pub window: MultichannelWindow,
    pub target: Position,
    pub sequence: String,
    pub t_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealWindowSet {
    pub windows: Vec<RealWindow>,
}

impl RealWindowSet {
    /// Distinct sequence ids in first-seen order.
    pub fn sequences(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for w in &self.windows {
            if !out.contains(&w.sequence) {
                out.push(w.sequence.clone());
            }
        }
        out
    }

    pub fn extend(&mut self, other: RealWindowSet) {
        self.windows.extend(other.windows);
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Why frames were left out of a window set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractionReport {
    pub silent: usize,
    pub before_start: usize,
    pub past_end: usize,
}

/// Cuts one window per speaking frame, ending at the frame time.
///
/// The window covers samples `[e − N, e)` with `e = round(t · fs / 1000)`,
/// so it uses only audio up to the annotation instant. Frames without
/// enough history are skipped, as are frames that end at most one frame
/// shift past the audio; anything later means audio and annotation do not
/// belong together.
pub fn extract_real_windows(
    sequence: &str,
    channels: &[Vec<f64>],
    sample_rate: f64,
    track: &GroundTruthTrack,
    window_len: usize,
    expected_channels: usize,
) -> Result<(RealWindowSet, ExtractionReport)> {
    if channels.len() != expected_channels {
        return Err(Error::LengthMismatch {
            expected: expected_channels,
            got: channels.len(),
        });
    }
    if window_len == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let tolerance = libm::round(FRAME_SHIFT_MS as f64 * sample_rate / 1000.0) as usize;
    let shortest = channels.iter().map(Vec::len).min().unwrap_or(0);
    let longest = channels.iter().map(Vec::len).max().unwrap_or(0);
    if longest - shortest > tolerance {
        return Err(Error::GroundTruth(format!(
            "{sequence}: channel lengths differ by {} samples",
            longest - shortest
        )));
    }
    let mut set = RealWindowSet::default();
    let mut report = ExtractionReport {
        silent: track.len() - track.speaking().count(),
        ..Default::default()
    };
    for r in track.speaking() {
        let end = libm::round(r.t_ms as f64 * sample_rate / 1000.0) as usize;
        if end < window_len {
            report.before_start += 1;
            continue;
        }
        if end > shortest {
            if end - shortest > tolerance {
                return Err(Error::GroundTruth(format!(
                    "{sequence}: frame at {} ms lies beyond the {} ms of audio",
                    r.t_ms,
                    shortest as f64 * 1000.0 / sample_rate
                )));
            }
            report.past_end += 1;
            continue;
        }
        let data: Vec<Vec<f64>> = channels.iter().map(|c| c[end - window_len..end].to_vec()).collect();
        set.windows.push(RealWindow {
            window: MultichannelWindow::new(data, sample_rate)?,
            target: r.position,
            sequence: sequence.to_string(),
            t_ms: r.t_ms,
        });
    }
    Ok((set, report))
}
