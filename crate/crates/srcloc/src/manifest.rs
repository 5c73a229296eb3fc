//! Sequence and corpus manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srcloc_core::geometry::ArrayGeometry;
use srcloc_core::realdata::{extract_real_windows, ExtractionReport, GroundTruthTrack, RealWindowSet, FRAME_SHIFT_MS};
use srcloc_core::signal::AnechoicClip;
use srcloc_core::speech;

use crate::annotations::parse_ground_truth;
use crate::config::{CorpusConfig, GeometryConfig};
use crate::error::{Error, Result};
use crate::wav::read_wav;

/// Coordinate frame of a ground-truth file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    #[default]
    Room,
    /// Centered on the array; mapped through the geometry transform.
    Array,
}

/// One recorded sequence. Paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub id: String,
    /// One mono WAV per microphone, in channel order.
    pub channels: Vec<PathBuf>,
    pub ground_truth: PathBuf,
    #[serde(default)]
    pub frame: Frame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// A sequence with audio and annotations in memory.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub id: String,
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub track: GroundTruthTrack,
    /// Annotation times whose position lies outside the room.
    pub outside_room: Vec<u64>,
    /// Files read, for the inputs manifest.
    pub files: Vec<PathBuf>,
}

impl SequenceManifest {
    /// Parses the manifest and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for c in m.channels.iter_mut() {
            *c = base.join(&*c);
        }
        m.ground_truth = base.join(&m.ground_truth);
        Ok(m)
    }

    /// Writes the manifest with paths relative to `path`'s directory when possible.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let rel = |p: &Path| p.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf());
        let out = SequenceManifest {
            channels: self.channels.iter().map(|p| rel(p)).collect(),
            ground_truth: rel(&self.ground_truth),
            ..self.clone()
        };
        let text = toml::to_string(&out).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads audio and annotations and checks them against the geometry.
    pub fn read(&self, geom_cfg: &GeometryConfig) -> Result<Sequence> {
        let geom = geom_cfg.geometry()?;
        if self.channels.len() != geom.mic_count() {
            return Err(Error::Config(format!(
                "sequence {} lists {} channels, the geometry has {} microphones",
                self.id,
                self.channels.len(),
                geom.mic_count()
            )));
        }
        let rate = geom_cfg.sample_rate_hz()?;
        let channels = self
            .channels
            .iter()
            .map(|p| read_wav(p, Some(rate)).map(|(x, _)| x))
            .collect::<Result<Vec<_>>>()?;
        let tolerance = (FRAME_SHIFT_MS as usize * rate as usize) / 1000;
        let lo = channels.iter().map(Vec::len).min().unwrap_or(0);
        let hi = channels.iter().map(Vec::len).max().unwrap_or(0);
        if hi - lo > tolerance {
            return Err(Error::format(
                &self.channels[0],
                format!("channel lengths of {} differ by {} samples (more than one frame)", self.id, hi - lo),
            ));
        }
        let transform = geom_cfg.transform();
        let track = parse_ground_truth(
            &self.ground_truth,
            match self.frame {
                Frame::Room => None,
                Frame::Array => Some(&transform),
            },
        )?;
        let outside_room = track.outside_room(&geom);
        let mut files = self.channels.clone();
        files.push(self.ground_truth.clone());
        Ok(Sequence {
            id: self.id.clone(),
            channels,
            sample_rate: rate as f64,
            track,
            outside_room,
            files,
        })
    }
}

impl Sequence {
    pub fn windows(&self, window_len: usize, geom: &ArrayGeometry) -> Result<(RealWindowSet, ExtractionReport)> {
        Ok(extract_real_windows(
            &self.id,
            &self.channels,
            self.sample_rate,
            &self.track,
            window_len,
            geom.mic_count(),
        )?)
    }
}

/// Reads a corpus manifest: one WAV path per line, `#` comments, paths
/// relative to the manifest.
pub fn read_corpus_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let files: Vec<PathBuf> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect();
    if files.is_empty() {
        return Err(Error::format(path, "corpus manifest lists no files"));
    }
    Ok(files)
}

/// Loads the anechoic corpus, either from WAV files or generated.
/// Returns the clips and the files they came from.
pub fn load_corpus(cfg: &CorpusConfig, sample_rate: u32, seed: u64) -> Result<(Vec<AnechoicClip>, Vec<PathBuf>)> {
    match &cfg.manifest {
        Some(m) => {
            let files = read_corpus_manifest(m)?;
            let clips = files
                .iter()
                .map(|f| {
                    read_wav(f, Some(sample_rate)).map(|(samples, _)| AnechoicClip {
                        samples,
                        sample_rate: sample_rate as f64,
                        source_id: f.display().to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut all = vec![m.clone()];
            all.extend(files);
            Ok((clips, all))
        }
        None => {
            if cfg.synthetic_clips == 0 || !(cfg.synthetic_min_s > 0.0 && cfg.synthetic_max_s >= cfg.synthetic_min_s) {
                return Err(Error::Config("synthetic corpus needs clips > 0 and 0 < min_s <= max_s".into()));
            }
            let fs = sample_rate as f64;
            let clips = speech::corpus(
                seed,
                cfg.synthetic_clips,
                (cfg.synthetic_min_s * fs) as usize,
                (cfg.synthetic_max_s * fs) as usize,
                fs,
            )
            .into_iter()
            .enumerate()
            .map(|(i, samples)| AnechoicClip {
                samples,
                sample_rate: fs,
                source_id: format!("synthetic-{i}"),
            })
            .collect();
            Ok((clips, Vec::new()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::write_wav;

    #[test]
    fn sequence_round_trip_and_channel_check() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let mut chans = Vec::new();
        for k in 0..4 {
            let p = d.join(format!("m{k}.wav"));
            write_wav(&p, &vec![0.01 * k as f64; 16_000], 16_000).unwrap();
            chans.push(p);
        }
        std::fs::write(d.join("gt.txt"), "400 1.0 2.0 1.2 1\n440 1.0 2.0 1.2 0\n").unwrap();
        let m = SequenceManifest {
            id: "s1".into(),
            channels: chans,
            ground_truth: d.join("gt.txt"),
            frame: Frame::Room,
            speaker: None,
            description: None,
        };
        m.save(&d.join("s1.toml")).unwrap();
        let text = std::fs::read_to_string(d.join("s1.toml")).unwrap();
        assert!(text.contains("\"m0.wav\""), "{text}");
        let back = SequenceManifest::load(&d.join("s1.toml")).unwrap();
        assert_eq!(back, m);
        let seq = back.read(&GeometryConfig::default()).unwrap();
        assert_eq!(seq.track.len(), 2);
        let g = GeometryConfig::default().geometry().unwrap();
        let (w, _) = seq.windows(1280, &g).unwrap();
        assert_eq!(w.len(), 1);

        let mut three = back.clone();
        three.channels.pop();
        assert!(matches!(three.read(&GeometryConfig::default()), Err(Error::Config(_))));
        let mut missing = back;
        missing.channels[0] = d.join("nope.wav");
        assert_eq!(
            missing.read(&GeometryConfig::default()).unwrap_err().exit_code(),
            crate::error::exit::MISSING_INPUT
        );
    }

    #[test]
    fn synthetic_corpus_is_seeded() {
        let cfg = CorpusConfig {
            synthetic_clips: 3,
            synthetic_min_s: 0.2,
            synthetic_max_s: 0.3,
            ..Default::default()
        };
        let (a, _) = load_corpus(&cfg, 16_000, 5).unwrap();
        let (b, _) = load_corpus(&cfg, 16_000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|c| (3200..=4800).contains(&c.samples.len())));
    }

    #[test]
    fn corpus_manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write_wav(&dir.path().join("a.wav"), &[0.0, 0.5], 16_000).unwrap();
        std::fs::write(dir.path().join("list.txt"), "# clips\na.wav\n\n").unwrap();
        let cfg = CorpusConfig {
            manifest: Some(dir.path().join("list.txt")),
            ..Default::default()
        };
        let (clips, files) = load_corpus(&cfg, 16_000, 0).unwrap();
        assert_eq!(clips[0].samples, vec![0.0, 0.5]);
        assert_eq!(files.len(), 2);
    }
}
