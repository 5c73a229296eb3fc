//! Discrete Fourier transforms of arbitrary length.
//!
//! Lengths whose prime factors are all small go through a recursive
//! mixed-radix Cooley-Tukey transform. Anything with a large prime factor
//! falls back to Bluestein's chirp-z algorithm on a power-of-two grid.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Largest prime handled by a direct butterfly before switching to Bluestein.
const MAX_DIRECT_RADIX: usize = 61;

/// A precomputed transform of fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    MixedRadix {
        factors: Vec<usize>,
        // twiddles[k] = exp(-2πik/len)
        twiddles: Vec<Complex64>,
    },
    Bluestein(Box<Bluestein>),
}

#[derive(Debug, Clone)]
struct Bluestein {
    inner: FftPlan,
    // w[k] = exp(-iπk²/len)
    chirp: Vec<Complex64>,
    // forward transform of the conjugate chirp, wrapped onto the inner length
    kernel: Vec<Complex64>,
}

use alloc::boxed::Box;

impl FftPlan {
    /// Plans a transform of `len` points. `len` must be non-zero.
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        let factors = factorize(len);
        if factors.iter().all(|&p| p <= MAX_DIRECT_RADIX) {
            let twiddles = (0..len).map(|k| unit_phasor(-(k as f64), len as f64)).collect();
            FftPlan {
                len,
                kind: Kind::MixedRadix { factors, twiddles },
            }
        } else {
            FftPlan {
                len,
                kind: Kind::Bluestein(Box::new(Bluestein::new(len))),
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X[k] = Σ x[n] exp(-2πikn/N)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kind {
            Kind::MixedRadix { factors, twiddles } => {
                if self.len == 1 {
                    return;
                }
                let input = buf.to_vec();
                let mut scratch = vec![Complex64::new(0.0, 0.0); MAX_DIRECT_RADIX];
                mixed_radix(&input, 1, buf, factors, twiddles, 1, &mut scratch);
            }
            Kind::Bluestein(b) => b.run(buf),
        }
    }

    /// In-place inverse transform including the `1/N` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }

    /// Forward transform of a real sequence.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}

/// `exp(2πi·num/den)`, reducing the angle before evaluating.
pub(crate) fn unit_phasor(num: f64, den: f64) -> Complex64 {
    let r = num % den;
    let angle = 2.0 * PI * r / den;
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut factors = Vec::new();
    // radix 4 first: fewer levels for the common power-of-two lengths
    while n.is_multiple_of(4) {
        factors.push(4);
        n /= 4;
    }
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            factors.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    factors
}

/// Decimation-in-time step: `input` is read with `stride`, the transform of
/// length `out.len()` is written contiguously. `tw_step` maps this level's
/// twiddle exponents onto the full-length table.
fn mixed_radix(
    input: &[Complex64],
    stride: usize,
    out: &mut [Complex64],
    factors: &[usize],
    twiddles: &[Complex64],
    tw_step: usize,
    scratch: &mut [Complex64],
) {
    let n = out.len();
    if n == 1 {
        out[0] = input[0];
        return;
    }
    let p = factors[0];
    let m = n / p;
    for q in 0..p {
        mixed_radix(
            &input[q * stride..],
            stride * p,
            &mut out[q * m..(q + 1) * m],
            &factors[1..],
            twiddles,
            tw_step * p,
            scratch,
        );
    }
    let full = twiddles.len();
    match p {
        2 => {
            for k in 0..m {
                let a = out[k];
                let b = out[k + m] * twiddles[k * tw_step];
                out[k] = a + b;
                out[k + m] = a - b;
            }
        }
        4 => {
            for k in 0..m {
                let a0 = out[k];
                let a1 = out[k + m] * twiddles[k * tw_step];
                let a2 = out[k + 2 * m] * twiddles[2 * k * tw_step];
                let a3 = out[k + 3 * m] * twiddles[3 * k * tw_step];
                let s02 = a0 + a2;
                let d02 = a0 - a2;
                let s13 = a1 + a3;
                // -i·(a1 - a3)
                let d13 = a1 - a3;
                let d13 = Complex64::new(d13.im, -d13.re);
                out[k] = s02 + s13;
                out[k + m] = d02 + d13;
                out[k + 2 * m] = s02 - s13;
                out[k + 3 * m] = d02 - d13;
            }
        }
        _ => {
            let tmp = &mut scratch[..p];
            for k in 0..m {
                for (r, slot) in tmp.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let j = k + r * m;
                    for q in 0..p {
                        let idx = (q * j * tw_step) % full;
                        acc += out[q * m + k] * twiddles[idx];
                    }
                    *slot = acc;
                }
                for (r, v) in tmp.iter().enumerate() {
                    out[k + r * m] = *v;
                }
            }
        }
    }
}

impl Bluestein {
    fn new(len: usize) -> Self {
        let inner_len = (2 * len - 1).next_power_of_two();
        let inner = FftPlan::new(inner_len);
        let two_n = 2 * len as u128;
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let k2 = (k as u128 * k as u128) % two_n;
                unit_phasor(-(k2 as f64), two_n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); inner_len];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[inner_len - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Bluestein {
            inner,
            chirp,
            kernel,
        }
    }

    fn run(&self, buf: &mut [Complex64]) {
        let m = self.inner.len();
        let mut a = vec![Complex64::new(0.0, 0.0); m];
        for (k, v) in buf.iter().enumerate() {
            a[k] = *v * self.chirp[k];
        }
        self.inner.forward(&mut a);
        for (x, h) in a.iter_mut().zip(&self.kernel) {
            *x *= h;
        }
        self.inner.inverse(&mut a);
        for (k, v) in buf.iter_mut().enumerate() {
            *v = a[k] * self.chirp[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| *v * unit_phasor(-((k * t) as f64), n as f64))
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                Complex64::new(libm::sin(0.37 * t) + 0.1 * t.sqrt(), libm::cos(1.3 * t * t % 7.0))
            })
            .collect()
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn matches_naive_dft_on_mixed_lengths() {
        for n in [1usize, 2, 3, 4, 5, 6, 8, 12, 16, 20, 30, 49, 64, 90, 97, 101, 128, 210, 243, 257] {
            let x = signal(n);
            let mut y = x.clone();
            FftPlan::new(n).forward(&mut y);
            let reference = naive_dft(&x);
            let scale = reference.iter().map(|v| v.norm()).fold(1.0, f64::max);
            assert!(max_err(&y, &reference) < 1e-10 * scale, "n = {n}");
        }
    }

    #[test]
    fn inverse_round_trips() {
        for n in [7usize, 1280, 1031] {
            let x = signal(n);
            let plan = FftPlan::new(n);
            let mut y = x.clone();
            plan.forward(&mut y);
            plan.inverse(&mut y);
            assert!(max_err(&x, &y) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn factorization_uses_radix_four() {
        assert_eq!(factorize(5120), vec![4, 4, 4, 4, 4, 5]);
        assert_eq!(factorize(1280), vec![4, 4, 4, 4, 5]);
        assert_eq!(factorize(97), vec![97]);
    }
}
