//! Deterministic speech-like test signals.
//!
//! Stands in for a close-talk corpus when none is available: syllables of
//! either a formant-filtered glottal pulse train (voiced) or shaped noise
//! (unvoiced), separated by short pauses.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{domain, substream, StreamRng};

/// Two-pole resonator.
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, fs: f64) -> Self {
        let r = libm::exp(-PI * bandwidth / fs);
        let theta = 2.0 * PI * freq / fs;
        Resonator {
            a1: 2.0 * r * libm::cos(theta),
            a2: -r * r,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn syllable(rng: &mut StreamRng, len: usize, fs: f64, out: &mut Vec<f64>) {
    let voiced = rng.random::<f64>() < 0.8;
    let f0 = 90.0 + 130.0 * rng.random::<f64>();
    let formants = [
        (300.0 + 600.0 * rng.random::<f64>(), 80.0),
        (900.0 + 1400.0 * rng.random::<f64>(), 120.0),
        (2300.0 + 900.0 * rng.random::<f64>(), 180.0),
    ];
    let mut filters: Vec<Resonator> = formants.iter().map(|&(f, b)| Resonator::new(f, b, fs)).collect();
    let mut phase = 0.0;
    let mut prev = 0.0;
    for n in 0..len {
        let env = libm::sin(PI * n as f64 / len as f64);
        let excitation = if voiced {
            let jitter = 1.0 + 0.01 * Distribution::<f64>::sample(&StandardNormal, rng);
            phase += f0 * jitter / fs;
            if phase >= 1.0 {
                phase -= 1.0;
                1.0
            } else {
                0.0
            }
        } else {
            let w: f64 = StandardNormal.sample(rng);
            // first difference tilts the noise toward high frequencies
            let v = w - prev;
            prev = w;
            0.05 * v
        };
        let y: f64 = filters.iter_mut().map(|f| f.step(excitation)).sum();
        out.push(env * y);
    }
}

/// A speech-like waveform of `len` samples, peak-normalized to 0.5.
pub fn utterance(seed: u64, len: usize, fs: f64) -> Vec<f64> {
    let mut rng = substream(seed, domain::SPEECH, 0);
    let mut out = Vec::with_capacity(len + 8000);
    while out.len() < len {
        let syl = ((0.12 + 0.18 * rng.random::<f64>()) * fs) as usize;
        syllable(&mut rng, syl.max(16), fs, &mut out);
        if rng.random::<f64>() < 0.3 {
            let pause = ((0.03 + 0.1 * rng.random::<f64>()) * fs) as usize;
            out.extend(core::iter::repeat_n(0.0, pause));
        }
    }
    out.truncate(len);
    // faint floor so no window is exactly silent
    for v in out.iter_mut() {
        *v += 1e-4 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in out.iter_mut() {
            *v *= 0.5 / peak;
        }
    }
    out
}

/// Several utterances of random lengths between `min_len` and `max_len`.
pub fn corpus(seed: u64, count: usize, min_len: usize, max_len: usize, fs: f64) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, domain::SPEECH, u64::MAX);
    (0..count)
        .map(|i| {
            let len = if max_len > min_len {
                rng.random_range(min_len..=max_len)
            } else {
                min_len
            };
            utterance(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), len, fs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utterance_is_deterministic_and_bounded() {
        let a = utterance(3, 8000, 16_000.0);
        assert_eq!(a, utterance(3, 8000, 16_000.0));
        assert_ne!(a, utterance(4, 8000, 16_000.0));
        assert_eq!(a.len(), 8000);
        let peak = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
    }

    #[test]
    fn corpus_lengths_in_range() {
        let c = corpus(1, 5, 4000, 6000, 16_000.0);
        assert_eq!(c.len(), 5);
        assert!(c.iter().all(|u| (4000..=6000).contains(&u.len())));
    }
}
