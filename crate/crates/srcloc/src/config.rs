//! Run configuration: TOML file, command-line overrides and defaults,
//! resolved once and echoed next to the outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use srcloc_core::dsp::{HeightMode, SearchGrid, SrpOptions, TdoaLookup};
use srcloc_core::geometry::{
    build_idiap_geometry, ArrayGeometry, IdiapConfig, Position, RigidTransform, SourceBox, IDIAP_ROOM,
    IDIAP_SUBSET, SAMPLE_RATE, SPEED_OF_SOUND,
};
use srcloc_core::nn::{AdamConfig, ConvBlock, REFERENCE_BLOCKS, REFERENCE_DROPOUT, REFERENCE_HIDDEN};
use srcloc_core::signal::{DelayMode, EpochSpec, NoiseLevel, NoiseSpec};
use srcloc_core::train::{Topology, TrainConfig};

use crate::error::{Error, Result};

/// Room, array placement and physical constants.
///
/// Microphones follow the IDIAP two-ring layout; `mics` selects which of
/// the 16 are used and in what channel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub room: [f64; 3],
    /// Array frame to room frame: rotation about +z, degrees.
    pub array_yaw_deg: f64,
    pub array_translation: [f64; 3],
    pub mics: Vec<u16>,
    pub speed_of_sound: f64,
    pub sample_rate: f64,
    /// Region of plausible source positions.
    pub source_lo: [f64; 3],
    pub source_hi: [f64; 3],
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let idiap = IdiapConfig::default();
        let b = SourceBox::idiap();
        GeometryConfig {
            room: IDIAP_ROOM.to_array(),
            array_yaw_deg: idiap.transform.yaw.to_degrees(),
            array_translation: idiap.transform.translation.to_array(),
            mics: IDIAP_SUBSET.to_vec(),
            speed_of_sound: SPEED_OF_SOUND,
            sample_rate: SAMPLE_RATE,
            source_lo: b.lo().to_array(),
            source_hi: b.hi().to_array(),
        }
    }
}

impl GeometryConfig {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform {
            yaw: self.array_yaw_deg.to_radians(),
            translation: Position::from_array(self.array_translation),
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        Ok(build_idiap_geometry(&IdiapConfig {
            transform: self.transform(),
            subset: Some(self.mics.clone()),
            speed_of_sound: self.speed_of_sound,
            sample_rate: self.sample_rate,
            room: Position::from_array(self.room),
        })?)
    }

    pub fn source_box(&self) -> Result<SourceBox> {
        let b = SourceBox::new(Position::from_array(self.source_lo), Position::from_array(self.source_hi))?;
        b.check_within(&self.geometry()?)?;
        Ok(b)
    }

    pub fn sample_rate_hz(&self) -> Result<u32> {
        let r = self.sample_rate;
        if r.fract() != 0.0 || !(1.0..=1e6).contains(&r) {
            return Err(Error::Config(format!("sample rate {r} must be a whole number of Hz")));
        }
        Ok(r as u32)
    }
}

/// Where anechoic source audio comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    /// Text file listing WAV paths; when absent a synthetic speech-like
    /// corpus is generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default = "default_synthetic_clips")]
    pub synthetic_clips: usize,
    #[serde(default = "default_min_s")]
    pub synthetic_min_s: f64,
    #[serde(default = "default_max_s")]
    pub synthetic_max_s: f64,
}

fn default_synthetic_clips() -> usize {
    40
}
fn default_min_s() -> f64 {
    1.0
}
fn default_max_s() -> f64 {
    3.0
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            manifest: None,
            synthetic_clips: default_synthetic_clips(),
            synthetic_min_s: default_min_s(),
            synthetic_max_s: default_max_s(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModeName {
    #[default]
    Circular,
    GuardBand,
}

/// Contamination model and dataset size for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub examples: usize,
    pub windows_per_clip: usize,
    pub tone_gain: f64,
    pub tone_freq_hz: [f64; 2],
    /// Target SNR; `noise_std` takes precedence when set.
    pub snr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    pub gain_range: [f64; 2],
    pub delay_mode: DelayModeName,
    pub min_rms: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let n = NoiseSpec::default();
        let snr = match n.noise {
            NoiseLevel::SnrDb(s) => s,
            NoiseLevel::Fixed(_) => 20.0,
        };
        SimulateConfig {
            examples: 8000,
            windows_per_clip: EpochSpec::default().windows_per_clip,
            tone_gain: n.tone_gain,
            tone_freq_hz: [n.tone_freq.0, n.tone_freq.1],
            snr_db: snr,
            noise_std: None,
            gain_range: [n.gain_range.0, n.gain_range.1],
            delay_mode: DelayModeName::Circular,
            min_rms: EpochSpec::default().min_rms,
        }
    }
}

impl SimulateConfig {
    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            tone_gain: self.tone_gain,
            tone_freq: (self.tone_freq_hz[0], self.tone_freq_hz[1]),
            noise: match self.noise_std {
                Some(k) => NoiseLevel::Fixed(k),
                None => NoiseLevel::SnrDb(self.snr_db),
            },
            gain_range: (self.gain_range[0], self.gain_range[1]),
            ..NoiseSpec::default()
        }
    }

    pub fn delay_mode(&self) -> DelayMode {
        match self.delay_mode {
            DelayModeName::Circular => DelayMode::Circular,
            DelayModeName::GuardBand => DelayMode::GuardBand,
        }
    }

    /// One epoch holding exactly `examples` windows, none held out.
    pub fn epoch_spec(&self) -> Result<EpochSpec> {
        if self.examples == 0 || self.windows_per_clip == 0 {
            return Err(Error::Config("simulate.examples and windows_per_clip must be positive".into()));
        }
        if !self.examples.is_multiple_of(self.windows_per_clip) {
            return Err(Error::Config(format!(
                "simulate.examples ({}) must be a multiple of windows_per_clip ({})",
                self.examples, self.windows_per_clip
            )));
        }
        Ok(EpochSpec {
            clips: self.examples / self.windows_per_clip,
            windows_per_clip: self.windows_per_clip,
            validation_fraction: 0.0,
            min_rms: self.min_rms,
        })
    }
}

/// One convolutional block; pooling uses the kernel size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    pub filters: usize,
    pub kernel: usize,
    pub pool: bool,
}

/// Optimizer, schedule and network layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub clips_per_epoch: usize,
    pub windows_per_clip: usize,
    pub validation_fraction: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub finetune_epochs: usize,
    pub blocks: Vec<BlockSection>,
    pub hidden: usize,
    pub dropout: f64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            clips_per_epoch: t.epoch.clips,
            windows_per_clip: t.epoch.windows_per_clip,
            validation_fraction: t.epoch.validation_fraction,
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            epsilon: t.adam.epsilon,
            finetune_epochs: t.finetune_epochs,
            blocks: REFERENCE_BLOCKS
                .iter()
                .map(|b| BlockSection {
                    filters: b.filters,
                    kernel: b.kernel,
                    pool: b.pool,
                })
                .collect(),
            hidden: REFERENCE_HIDDEN,
            dropout: REFERENCE_DROPOUT,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LookupName {
    #[default]
    Linear,
    BandLimited,
}

/// SRP-PHAT search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrpSection {
    pub resolution_m: f64,
    /// Fixed search height in meters; the full box height is searched when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
    pub lookup: LookupName,
    pub upsample: usize,
    pub interpolate: bool,
}

impl Default for SrpSection {
    fn default() -> Self {
        SrpSection {
            resolution_m: 0.05,
            height_m: None,
            lookup: LookupName::Linear,
            upsample: 8,
            interpolate: false,
        }
    }
}

impl SrpSection {
    pub fn options(&self) -> SrpOptions {
        SrpOptions {
            lookup: match self.lookup {
                LookupName::Linear => TdoaLookup::Linear { upsample: self.upsample },
                LookupName::BandLimited => TdoaLookup::BandLimited,
            },
            interpolate: self.interpolate,
        }
    }

    pub fn grid(&self, geom: &ArrayGeometry, bounds: SourceBox) -> Result<SearchGrid> {
        let height = match self.height_m {
            Some(h) => HeightMode::Fixed(h),
            None => HeightMode::Search,
        };
        Ok(SearchGrid::new(
            geom,
            bounds,
            self.resolution_m,
            height,
            srcloc_core::dsp::default_pairs(geom),
        )?)
    }
}

/// Everything a command needs, after merging file, flags and defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_window_ms")]
    pub window_ms: u32,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Single worker everywhere.
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub srp: SrpSection,
}

fn default_window_ms() -> u32 {
    80
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub window_ms: Option<u32>,
    pub out: Option<PathBuf>,
    pub deterministic: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
    }

    /// Loads `path` (or the defaults), then applies `overrides`. Relative
    /// paths inside the file are taken relative to the file.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let mut c = Self::from_toml(&text, p)?;
                let base = p.parent().unwrap_or(Path::new(""));
                if let Some(m) = &c.corpus.manifest {
                    c.corpus.manifest = Some(base.join(m));
                }
                c
            }
            None => RunConfig::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(w) = overrides.window_ms {
            cfg.window_ms = w;
        }
        if let Some(o) = &overrides.out {
            cfg.out = o.clone();
        }
        cfg.deterministic |= overrides.deterministic;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.sample_rate_hz()?;
        self.geometry.source_box()?;
        self.simulate.noise_spec().validate()?;
        self.train_config()?.validate()?;
        if self.srp.resolution_m.is_nan() || self.srp.resolution_m <= 0.0 {
            return Err(Error::Config("srp.resolution_m must be positive".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        if t.blocks.is_empty() {
            return Err(Error::Config("train.blocks must list at least one block".into()));
        }
        Ok(TrainConfig {
            window_ms: self.window_ms,
            sample_rate: self.geometry.sample_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            epoch: EpochSpec {
                clips: t.clips_per_epoch,
                windows_per_clip: t.windows_per_clip,
                validation_fraction: t.validation_fraction,
                min_rms: self.simulate.min_rms,
            },
            adam: AdamConfig {
                learning_rate: t.learning_rate,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
            },
            seed: self.seed,
            finetune_epochs: t.finetune_epochs,
            topology: Topology {
                blocks: t.blocks.iter().map(|b| ConvBlock::new(b.filters, b.kernel, b.pool)).collect(),
                hidden: t.hidden,
                dropout: t.dropout,
            },
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Writes the resolved config to `dir/run.resolved`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("run.resolved");
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Content hash of a file, hex encoded.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Paths and content hashes of a command's inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputsManifest {
    entries: BTreeMap<String, (PathBuf, String)>,
}

impl InputsManifest {
    pub fn add(&mut self, role: &str, path: &Path) -> Result<()> {
        let h = sha256_file(path)?;
        self.entries.insert(role.to_string(), (path.to_path_buf(), h));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (role, (path, hash)) in &self.entries {
            s.push_str(&format!("{role} {hash} {}\n", path.display()));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("inputs.manifest");
        std::fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_round_trip() {
        let c = RunConfig::default();
        assert_eq!(c.window_ms, 80);
        assert_eq!(c.geometry.mics, vec![1, 5, 11, 15]);
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 1\n", "[train]\nepoch = 3\n", "[geometry]\nmicz = [1, 2]\n"] {
            let e = RunConfig::from_toml(text, Path::new("c.toml")).unwrap_err();
            assert_eq!(e.exit_code(), crate::error::exit::CONFIG, "{text}");
        }
    }

    #[test]
    fn overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 3\nwindow_ms = 160\n[corpus]\nmanifest = \"list.txt\"\n").unwrap();
        let c = RunConfig::resolve(
            Some(&p),
            &Overrides {
                seed: Some(9),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((c.seed, c.window_ms), (9, 160));
        assert_eq!(c.corpus.manifest.unwrap(), dir.path().join("list.txt"));
    }

    #[test]
    fn bad_window_is_a_config_error() {
        let e = RunConfig::resolve(
            None,
            &Overrides {
                window_ms: Some(0),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), crate::error::exit::CONFIG);
    }

    #[test]
    fn geometry_config_matches_four_mic_layout() {
        let g = GeometryConfig::default().geometry().unwrap();
        let reference = build_idiap_geometry(&IdiapConfig::four_mic()).unwrap();
        for (a, b) in g.mics().iter().zip(reference.mics()) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn inputs_manifest_hashes_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        std::fs::write(&p, b"abc").unwrap();
        let mut m = InputsManifest::default();
        m.add("corpus", &p).unwrap();
        assert!(m
            .render()
            .starts_with("corpus ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad "));
    }
}
