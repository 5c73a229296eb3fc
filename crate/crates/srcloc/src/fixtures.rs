//! Simulated stand-ins for recorded sequences.
//!
//! A speaker emits speech-like audio from a few fixed spots inside a
//! sub-region of the room, one spot per segment. Each microphone hears the
//! contaminated source delayed and scaled, plus an optional echo, so the
//! audio differs from the pretraining simulation the way a real room would.

use std::path::{Path, PathBuf};

use rand::Rng;
use srcloc_core::geometry::{ArrayGeometry, SourceBox};
use srcloc_core::realdata::{GroundTruthRecord, GroundTruthTrack, FRAME_SHIFT_MS};
use srcloc_core::rng::{child_seed, substream};
use srcloc_core::signal::{contaminate, fractional_delay, sample_source_position, NoiseSpec};
use srcloc_core::speech;

use crate::annotations::write_ground_truth;
use crate::error::Result;
use crate::manifest::{Frame, SequenceManifest};
use crate::wav::write_wav;

const FIXTURE_DOMAIN: u64 = 0x5EC0;

/// How a simulated sequence is produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLikeSpec {
    pub duration_s: f64,
    /// The speaker stays put for this long.
    pub segment_s: f64,
    /// Where the speaker may stand.
    pub region: SourceBox,
    pub noise: NoiseSpec,
    /// Extra path delay (ms) and relative gain of a single reflection.
    pub echo: Option<(f64, f64)>,
    /// Frames whose clean-source RMS falls below this are marked silent.
    pub speech_rms: f64,
}

impl RealLikeSpec {
    /// A seated speaker near one end of the table in a noisier,
    /// echoing room.
    pub fn mismatched(region: SourceBox) -> Self {
        RealLikeSpec {
            duration_s: 8.0,
            segment_s: 1.0,
            region,
            noise: NoiseSpec {
                tone_gain: 0.05,
                tone_freq: (45.0, 55.0),
                noise: srcloc_core::signal::NoiseLevel::SnrDb(10.0),
                gain_range: (0.05, 0.15),
                ..NoiseSpec::default()
            },
            echo: Some((3.0, 0.4)),
            speech_rms: 0.01,
        }
    }
}

/// A simulated sequence in memory.
#[derive(Debug, Clone)]
pub struct RealLikeSequence {
    pub id: String,
    pub channels: Vec<Vec<f64>>,
    pub track: GroundTruthTrack,
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

pub fn simulate_sequence(id: &str, geom: &ArrayGeometry, spec: &RealLikeSpec, seed: u64) -> Result<RealLikeSequence> {
    let fs = geom.sample_rate();
    let total = (spec.duration_s * fs) as usize;
    let frame = (FRAME_SHIFT_MS as f64 * fs / 1000.0) as usize;
    let segment = ((spec.segment_s * fs) as usize / frame).max(1) * frame;
    let source = speech::utterance(child_seed(seed, FIXTURE_DOMAIN, 0), total, fs);
    let mut rng = substream(seed, FIXTURE_DOMAIN, 1);
    let gains: Vec<f64> = (0..geom.mic_count())
        .map(|_| spec.noise.gain_range.0 + (spec.noise.gain_range.1 - spec.noise.gain_range.0) * rng.random::<f64>())
        .collect();
    let echo_samples = spec.echo.map_or(0.0, |(ms, _)| ms * fs / 1000.0);
    // longest possible propagation delay from anywhere in the room
    let diag = (geom.room_max() - geom.room_min()).norm();
    let guard = (diag / geom.speed_of_sound() * fs + echo_samples).ceil() as usize + 2;
    let mut channels = vec![Vec::with_capacity(total); geom.mic_count()];
    let mut positions = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + segment).min(total);
        let q = sample_source_position(&spec.region, &mut rng);
        positions.push((start, end, q));
        let mut excerpt = vec![0.0; guard.saturating_sub(start)];
        excerpt.extend_from_slice(&source[start.saturating_sub(guard)..end]);
        let (dirty, _) = contaminate(&excerpt, &spec.noise, fs, &mut rng)?;
        let keep = end - start;
        for (m, (ch, &g)) in channels.iter_mut().zip(&gains).enumerate() {
            let d = srcloc_core::geometry::sample_delay(q, m, geom)?;
            let direct = fractional_delay(&dirty, d, g)?;
            let echo = match spec.echo {
                Some((_, eg)) => Some(fractional_delay(&dirty, d + echo_samples, g * eg)?),
                None => None,
            };
            let n = direct.len();
            for i in n - keep..n {
                ch.push(direct[i] + echo.as_ref().map_or(0.0, |e| e[i]));
            }
        }
        start = end;
    }
    let mut records = Vec::new();
    let mut t = FRAME_SHIFT_MS;
    loop {
        let e = (t as f64 * fs / 1000.0).round() as usize;
        if e > total {
            break;
        }
        let q = positions.iter().find(|(a, b, _)| *a < e && e <= *b).map(|p| p.2).unwrap_or(positions[0].2);
        records.push(GroundTruthRecord {
            t_ms: t,
            position: q,
            speaking: rms(&source[e.saturating_sub(frame)..e]) >= spec.speech_rms,
        });
        t += FRAME_SHIFT_MS;
    }
    Ok(RealLikeSequence {
        id: id.to_string(),
        channels,
        track: GroundTruthTrack::new(records)?,
    })
}

impl RealLikeSequence {
    /// Writes one WAV per channel, the ground truth and a manifest into
    /// `dir`; returns the manifest path.
    pub fn write(&self, dir: &Path, sample_rate: u32) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        let mut wavs = Vec::new();
        for (k, ch) in self.channels.iter().enumerate() {
            let p = dir.join(format!("{}_ch{}.wav", self.id, k + 1));
            write_wav(&p, ch, sample_rate)?;
            wavs.push(p);
        }
        let gt = dir.join(format!("{}.gt", self.id));
        write_ground_truth(&gt, &self.track)?;
        let manifest = SequenceManifest {
            id: self.id.clone(),
            channels: wavs,
            ground_truth: gt,
            frame: Frame::Room,
            speaker: Some("simulated".into()),
            description: Some("simulated stand-in for a recorded sequence".into()),
        };
        let path = dir.join(format!("{}.toml", self.id));
        manifest.save(&path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use srcloc_core::dsp::{gcc_phat_with, GccOptions};
    use srcloc_core::geometry::{build_idiap_geometry, IdiapConfig, Position};

    fn setup() -> (ArrayGeometry, RealLikeSpec) {
        let geom = build_idiap_geometry(&IdiapConfig::four_mic()).unwrap();
        let region = SourceBox::new(Position::new(1.0, 5.5, 1.1), Position::new(2.6, 6.5, 1.3)).unwrap();
        let mut spec = RealLikeSpec::mismatched(region);
        spec.duration_s = 2.0;
        (geom, spec)
    }

    #[test]
    fn frames_follow_the_grid_and_stay_in_region() {
        let (geom, spec) = setup();
        let s = simulate_sequence("rl", &geom, &spec, 3).unwrap();
        assert_eq!(s.channels.len(), 4);
        assert!(s.channels.iter().all(|c| c.len() == 32_000));
        assert_eq!(s.track.len(), 50);
        assert!(s.track.irregular_steps(40).is_empty());
        assert!(s.track.records().iter().all(|r| spec.region.contains(r.position)));
        assert!(s.track.speaking().count() > 20);
    }

    #[test]
    fn pair_delay_matches_geometry() {
        let (geom, mut spec) = setup();
        spec.echo = None;
        spec.noise = NoiseSpec::clean();
        let s = simulate_sequence("rl", &geom, &spec, 4).unwrap();
        let r = s.track.records()[30];
        let e = (r.t_ms * 16) as usize;
        let a = &s.channels[0][e - 2048..e];
        let b = &s.channels[1][e - 2048..e];
        let cf = gcc_phat_with(a, b, 16_000.0, GccOptions { max_lag: Some(20), upsample: 8 }).unwrap();
        let want = srcloc_core::geometry::sample_delay(r.position, 0, &geom).unwrap()
            - srcloc_core::geometry::sample_delay(r.position, 1, &geom).unwrap();
        assert!((cf.refined_peak().0 - want).abs() < 0.25, "{} vs {want}", cf.refined_peak().0);
    }

    #[test]
    fn seeded() {
        let (geom, spec) = setup();
        let a = simulate_sequence("rl", &geom, &spec, 9).unwrap();
        let b = simulate_sequence("rl", &geom, &spec, 9).unwrap();
        assert_eq!(a.channels, b.channels);
    }
}
