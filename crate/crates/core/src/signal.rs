//! Semi-synthetic multichannel window generation.
//!
//! A window of anechoic speech is contaminated with a low-frequency tone and
//! white Gaussian noise, then propagated to every microphone as a
//! frequency-domain fractional delay with an independent random gain.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fft::{unit_phasor, FftPlan};
use crate::geometry::{ArrayGeometry, Position, SourceBox};
use crate::rng::{child_seed, domain, substream, StreamRng};
use crate::{Error, Result};

/// A mono close-talk recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AnechoicClip {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub source_id: String,
}

/// One analysis window across all microphones, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelWindow {
    data: Vec<f64>,
    channels: usize,
    len: usize,
    sample_rate: f64,
}

impl MultichannelWindow {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        let m = channels.len();
        if m == 0 {
            return Err(Error::ShapeMismatch {
                op: "MultichannelWindow",
                detail: "no channels".into(),
            });
        }
        let n = channels[0].len();
        let mut data = Vec::with_capacity(m * n);
        for c in &channels {
            if c.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::from_flat(data, m, n, sample_rate)
    }

    /// Wraps `channels × len` samples laid out channel after channel.
    pub fn from_flat(data: Vec<f64>, channels: usize, len: usize, sample_rate: f64) -> Result<Self> {
        if data.len() != channels * len || channels == 0 || len == 0 {
            return Err(Error::ShapeMismatch {
                op: "MultichannelWindow",
                detail: format!("{} samples for {channels}x{len}", data.len()),
            });
        }
        Ok(MultichannelWindow {
            data,
            channels,
            len,
            sample_rate,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.data[i * self.len..(i + 1) * self.len]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.len..(i + 1) * self.len]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }
}

/// Reusable frequency-domain delay line for windows of a fixed length.
#[derive(Debug, Clone)]
pub struct FractionalDelay {
    plan: FftPlan,
}

impl FractionalDelay {
    pub fn new(len: usize) -> Self {
        FractionalDelay {
            plan: FftPlan::new(len.max(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }

    /// Circularly delays `x` by `delay` samples and scales it by `gain`.
    ///
    /// Bin `k` is multiplied by `exp(-2πi·k'·delay/N)` where `k'` is the
    /// signed frequency index (`k - N` above Nyquist), so the result stays
    /// real. For even `N` the Nyquist bin takes the sign `(-1)^round(delay)`,
    /// the real unit-modulus value nearest to the ideal phase factor.
    pub fn apply(&self, x: &[f64], delay: f64, gain: f64) -> Result<Vec<f64>> {
        let n = self.plan.len();
        if n < 2 || x.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: x.len(),
            });
        }
        if x.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if !delay.is_finite() || !gain.is_finite() {
            return Err(Error::NonFinite("fractional_delay parameters"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fractional_delay input"));
        }
        let mut spec = self.plan.forward_real(x);
        let nf = n as f64;
        // reduce first so k·delay stays small
        let d = delay % nf;
        for (k, bin) in spec.iter_mut().enumerate().skip(1) {
            let phase = if 2 * k < n {
                unit_phasor(-(k as f64) * d, nf)
            } else if 2 * k == n {
                let s = if (libm::round(delay) as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                Complex64::new(s, 0.0)
            } else {
                unit_phasor((n - k) as f64 * d, nf)
            };
            *bin *= phase;
        }
        self.plan.inverse(&mut spec);
        Ok(spec.into_iter().map(|c| gain * c.re).collect())
    }
}

/// One-shot form of [`FractionalDelay::apply`].
pub fn fractional_delay(x: &[f64], delay: f64, gain: f64) -> Result<Vec<f64>> {
    FractionalDelay::new(x.len()).apply(x, delay, gain)
}

/// How the white-noise scale `k_η` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// Signal-to-noise ratio relative to the clean speech window, dB.
    SnrDb(f64),
    /// Fixed standard deviation.
    Fixed(f64),
}

/// Contamination and gain model for simulated microphone signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Tone amplitude `k_s`.
    pub tone_gain: f64,
    /// Tone frequency range, Hz.
    pub tone_freq: (f64, f64),
    /// Tone phase range, rad.
    pub tone_phase: (f64, f64),
    pub noise: NoiseLevel,
    /// Per-microphone gain range `[A_lo, A_hi]`.
    pub gain_range: (f64, f64),
}

impl Default for NoiseSpec {
    /// IDIAP-like contamination: a 0.1 tone in 20-30 Hz, gains in [0.01, 0.03].
    ///
    /// The 20 dB SNR is a placeholder to be tuned against the target room.
    fn default() -> Self {
        NoiseSpec {
            tone_gain: 0.1,
            tone_freq: (20.0, 30.0),
            tone_phase: (0.0, PI),
            noise: NoiseLevel::SnrDb(20.0),
            gain_range: (0.01, 0.03),
        }
    }
}

impl NoiseSpec {
    /// No tone, no noise, unit gains.
    pub fn clean() -> Self {
        NoiseSpec {
            tone_gain: 0.0,
            noise: NoiseLevel::Fixed(0.0),
            gain_range: (1.0, 1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidNoiseSpec(m));
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
        if !(self.tone_gain.is_finite() && self.tone_gain >= 0.0) {
            return bad(format!("tone gain {} must be finite and non-negative", self.tone_gain));
        }
        if !range_ok(self.tone_freq) {
            return bad(format!("tone frequency range {:?}", self.tone_freq));
        }
        if !range_ok(self.tone_phase) {
            return bad(format!("tone phase range {:?}", self.tone_phase));
        }
        if !range_ok(self.gain_range) {
            return bad(format!("gain range {:?}", self.gain_range));
        }
        match self.noise {
            NoiseLevel::SnrDb(s) if !s.is_finite() => bad(format!("SNR {s} dB is not finite")),
            NoiseLevel::Fixed(k) if !(k.is_finite() && k >= 0.0) => bad(format!("noise gain {k}")),
            _ => Ok(()),
        }
    }
}

/// Random draws made while contaminating one window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Contamination {
    pub tone_freq: f64,
    pub tone_phase: f64,
    pub noise_gain: f64,
    /// Clean-signal power over the power of the added noise, dB (NaN if undefined).
    pub realized_snr_db: f64,
}

fn uniform(rng: &mut StreamRng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        // still consume a draw so stream positions do not depend on the range
        let _: f64 = rng.random();
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds a random low-frequency tone and scaled white Gaussian noise to `x`.
pub fn contaminate(
    x: &[f64],
    spec: &NoiseSpec,
    sample_rate: f64,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, Contamination)> {
    spec.validate()?;
    let tone_freq = uniform(rng, spec.tone_freq);
    let tone_phase = uniform(rng, spec.tone_phase);
    let signal_power = mean_power(x);
    let noise_gain = match spec.noise {
        NoiseLevel::Fixed(k) => k,
        NoiseLevel::SnrDb(snr) => {
            if signal_power <= 0.0 {
                return Err(Error::ZeroEnergy("contaminate (SNR mode)"));
            }
            libm::sqrt(signal_power / libm::pow(10.0, snr / 10.0))
        }
    };
    let mut noise_power = 0.0;
    let out: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let tone = spec.tone_gain * libm::sin(2.0 * PI * tone_freq * n as f64 / sample_rate + tone_phase);
            let eta: f64 = StandardNormal.sample(rng);
            let noise = noise_gain * eta;
            noise_power += noise * noise;
            v + tone + noise
        })
        .collect();
    noise_power /= x.len().max(1) as f64;
    let realized_snr_db = if noise_power > 0.0 && signal_power > 0.0 {
        10.0 * libm::log10(signal_power / noise_power)
    } else {
        f64::NAN
    };
    Ok((
        out,
        Contamination {
            tone_freq,
            tone_phase,
            noise_gain,
            realized_snr_db,
        },
    ))
}

/// Draws a position uniformly from `bounds`.
pub fn sample_source_position(bounds: &SourceBox, rng: &mut StreamRng) -> Position {
    let (lo, hi) = (bounds.lo(), bounds.hi());
    Position::new(
        uniform(rng, (lo.x, hi.x)),
        uniform(rng, (lo.y, hi.y)),
        uniform(rng, (lo.z, hi.z)),
    )
}

/// Where the delay ramp's circular wrap-around goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayMode {
    /// Delay the N-sample window itself; late samples wrap to the start.
    #[default]
    Circular,
    /// Delay a longer excerpt and keep its last N samples, so nothing wraps.
    GuardBand,
}

/// Bookkeeping attached to every synthesized example.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExampleMeta {
    pub clip_index: usize,
    pub offset: usize,
    pub gains: Vec<f64>,
    pub delays: Vec<f64>,
    pub contamination: Contamination,
}

/// A network input paired with its source position.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub window: MultichannelWindow,
    pub target: Position,
    pub meta: ExampleMeta,
}

/// Fixed parameters shared by every example of a dataset.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    geom: ArrayGeometry,
    spec: NoiseSpec,
    bounds: SourceBox,
    window_len: usize,
    mode: DelayMode,
    guard: usize,
    delay_line: FractionalDelay,
}

impl Synthesizer {
    pub fn new(
        geom: ArrayGeometry,
        spec: NoiseSpec,
        bounds: SourceBox,
        window_len: usize,
        mode: DelayMode,
    ) -> Result<Self> {
        spec.validate()?;
        bounds.check_within(&geom)?;
        if window_len < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: window_len,
            });
        }
        // worst-case delay: farthest box corner to any microphone
        let (lo, hi) = (bounds.lo(), bounds.hi());
        let mut max_delay: f64 = 0.0;
        for cx in [lo.x, hi.x] {
            for cy in [lo.y, hi.y] {
                for cz in [lo.z, hi.z] {
                    for d in geom.delays(Position::new(cx, cy, cz)) {
                        max_delay = max_delay.max(d);
                    }
                }
            }
        }
        let guard = match mode {
            DelayMode::Circular => 0,
            DelayMode::GuardBand => libm::ceil(max_delay) as usize + 1,
        };
        Ok(Synthesizer {
            delay_line: FractionalDelay::new(window_len + guard),
            geom,
            spec,
            bounds,
            window_len,
            mode,
            guard,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    pub fn noise_spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &SourceBox {
        &self.bounds
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn mode(&self) -> DelayMode {
        self.mode
    }

    /// Samples of source audio consumed per example.
    pub fn excerpt_len(&self) -> usize {
        self.window_len + self.guard
    }

    /// Simulates the array recording of `clip[offset..]` emitted from `q`.
    ///
    /// The source excerpt is contaminated first, then delayed and scaled
    /// independently for each microphone.
    pub fn synthesize(
        &self,
        clip: &AnechoicClip,
        offset: usize,
        q: Position,
        rng: &mut StreamRng,
    ) -> Result<LabeledExample> {
        let span = self.excerpt_len();
        let end = offset.saturating_add(span);
        if end > clip.samples.len() {
            return Err(Error::WindowOutOfClip {
                offset,
                end,
                len: clip.samples.len(),
            });
        }
        if !q.is_finite() || !self.bounds.contains(q) {
            return Err(Error::OutsideBox(format!("{q}")));
        }
        let excerpt = &clip.samples[offset..end];
        let (source, contamination) = contaminate(excerpt, &self.spec, self.geom.sample_rate(), rng)?;
        let delays = self.geom.delays(q);
        let m = self.geom.mic_count();
        let mut data = Vec::with_capacity(m * self.window_len);
        let mut gains = Vec::with_capacity(m);
        for &d in &delays {
            let gain = uniform(rng, self.spec.gain_range);
            let delayed = self.delay_line.apply(&source, d, gain)?;
            data.extend_from_slice(&delayed[self.guard..]);
            gains.push(gain);
        }
        Ok(LabeledExample {
            window: MultichannelWindow::from_flat(data, m, self.window_len, self.geom.sample_rate())?,
            target: q,
            meta: ExampleMeta {
                clip_index: 0,
                offset,
                gains,
                delays,
                contamination,
            },
        })
    }
}

/// Size of one generated epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSpec {
    /// Recordings drawn per epoch, each paired with one random source position.
    pub clips: usize,
    /// Windows cut from each recording.
    pub windows_per_clip: usize,
    /// Share of the examples held out for validation.
    pub validation_fraction: f64,
    /// Windows whose RMS falls below this are redrawn.
    pub min_rms: f64,
}

impl Default for EpochSpec {
    /// 200 clips × 40 windows, 7200 for training and 800 for validation.
    fn default() -> Self {
        EpochSpec {
            clips: 200,
            windows_per_clip: 40,
            validation_fraction: 0.1,
            min_rms: 1e-4,
        }
    }
}

impl EpochSpec {
    /// Scales the number of clips, keeping windows per clip.
    pub fn scaled(factor: f64) -> Self {
        let base = Self::default();
        EpochSpec {
            clips: libm::round(base.clips as f64 * factor).max(1.0) as usize,
            ..base
        }
    }

    pub fn total(&self) -> usize {
        self.clips * self.windows_per_clip
    }

    pub fn validation_count(&self) -> usize {
        libm::round(self.total() as f64 * self.validation_fraction) as usize
    }

    pub fn train_count(&self) -> usize {
        self.total() - self.validation_count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clips == 0 || self.windows_per_clip == 0 {
            return Err(Error::InvalidConfig("epoch must contain at least one example".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction {} must lie in [0, 1)",
                self.validation_fraction
            )));
        }
        if !(self.min_rms >= 0.0 && self.min_rms.is_finite()) {
            return Err(Error::InvalidConfig(format!("min_rms {}", self.min_rms)));
        }
        Ok(())
    }
}

/// Recipe of one example in an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    group: usize,
    clip: usize,
}

/// The deterministic layout of one epoch: which clip and position each
/// example uses, and which examples are held out.
///
/// Examples are generated lazily by index, each from its own random
/// substream, so serial and parallel generation agree.
#[derive(Debug, Clone)]
pub struct EpochPlan<'a> {
    synth: &'a Synthesizer,
    corpus: &'a [AnechoicClip],
    spec: EpochSpec,
    seed: u64,
    slots: Vec<Slot>,
    positions: Vec<Position>,
    train: Vec<usize>,
    validation: Vec<usize>,
    with_replacement: bool,
}

impl<'a> EpochPlan<'a> {
    /// Lays out epoch `epoch` of a run seeded with `master_seed`.
    pub fn new(
        synth: &'a Synthesizer,
        corpus: &'a [AnechoicClip],
        spec: EpochSpec,
        master_seed: u64,
        epoch: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let need = synth.excerpt_len();
        let usable: Vec<usize> = corpus
            .iter()
            .enumerate()
            .filter(|(_, c)| c.samples.len() >= need)
            .map(|(i, _)| i)
            .collect();
        if usable.is_empty() {
            return Err(Error::CorpusTooSmall(format!(
                "no clip holds {need} samples ({} clips)",
                corpus.len()
            )));
        }
        let seed = child_seed(master_seed, domain::EPOCH_PLAN, epoch);
        let mut rng = substream(seed, domain::EPOCH_PLAN, 0);
        let with_replacement = usable.len() < spec.clips;
        let chosen: Vec<usize> = if with_replacement {
            (0..spec.clips).map(|_| usable[rng.random_range(0..usable.len())]).collect()
        } else {
            let mut pool = usable.clone();
            // partial Fisher-Yates
            for i in 0..spec.clips {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            pool.truncate(spec.clips);
            pool
        };
        let positions: Vec<Position> = (0..spec.clips)
            .map(|_| sample_source_position(synth.bounds(), &mut rng))
            .collect();
        let slots: Vec<Slot> = chosen
            .iter()
            .enumerate()
            .flat_map(|(group, &clip)| (0..spec.windows_per_clip).map(move |_| Slot { group, clip }))
            .collect();
        let mut order: Vec<usize> = (0..slots.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let n_val = spec.validation_count();
        let mut validation = order[..n_val].to_vec();
        let mut train = order[n_val..].to_vec();
        validation.sort_unstable();
        train.sort_unstable();
        Ok(EpochPlan {
            synth,
            corpus,
            spec,
            seed,
            slots,
            positions,
            train,
            validation,
            with_replacement,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn spec(&self) -> &EpochSpec {
        &self.spec
    }

    /// True when the corpus had fewer usable clips than requested.
    pub fn with_replacement(&self) -> bool {
        self.with_replacement
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn validation_indices(&self) -> &[usize] {
        &self.validation
    }

    /// Generates example `index` of the epoch.
    pub fn example(&self, index: usize) -> Result<LabeledExample> {
        let slot = self.slots[index];
        let q = self.positions[slot.group];
        let mut rng = substream(self.seed, domain::EXAMPLE, index as u64);
        let mut clip_idx = slot.clip;
        let span = self.synth.excerpt_len();
        // silent windows carry no cue: redraw the offset, then the clip
        for attempt in 0..1024 {
            let clip = &self.corpus[clip_idx];
            let offset = rng.random_range(0..=clip.samples.len() - span);
            let excerpt = &clip.samples[offset..offset + self.synth.window_len()];
            if libm::sqrt(mean_power(excerpt)) >= self.spec.min_rms {
                let mut ex = self.synth.synthesize(clip, offset, q, &mut rng)?;
                ex.meta.clip_index = clip_idx;
                return Ok(ex);
            }
            if attempt % 64 == 63 {
                clip_idx = rng.random_range(0..self.corpus.len());
                while self.corpus[clip_idx].samples.len() < span {
                    clip_idx = rng.random_range(0..self.corpus.len());
                }
            }
        }
        Err(Error::CorpusTooSmall(format!(
            "no window with RMS >= {} found for example {index}",
            self.spec.min_rms
        )))
    }

    pub fn train_examples(&self) -> impl Iterator<Item = Result<LabeledExample>> + '_ {
        self.train.iter().map(move |&i| self.example(i))
    }

    pub fn validation_examples(&self) -> impl Iterator<Item = Result<LabeledExample>> + '_ {
        self.validation.iter().map(move |&i| self.example(i))
    }
}

/// Convenience wrapper: all examples of one epoch, split into train and validation.
pub fn generate_epoch(
    synth: &Synthesizer,
    corpus: &[AnechoicClip],
    spec: EpochSpec,
    master_seed: u64,
    epoch: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>, bool)> {
    let plan = EpochPlan::new(synth, corpus, spec, master_seed, epoch)?;
    let train = plan.train_examples().collect::<Result<Vec<_>>>()?;
    let val = plan.validation_examples().collect::<Result<Vec<_>>>()?;
    Ok((train, val, plan.with_replacement()))
}

/// Unit-amplitude helper used by tests and diagnostics: a sine of `bin`
/// cycles over `n` samples.
pub fn bin_sine(n: usize, bin: usize, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|t| libm::sin(2.0 * PI * (bin * t) as f64 / n as f64 + phase))
        .collect()
}
