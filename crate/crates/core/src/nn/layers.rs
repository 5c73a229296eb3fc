//! Layer kernels on channel-major buffers.
//!
//! Convolutions are cross-correlations (no kernel flip) with stride 1 and
//! zero "same" padding: `out[f,t] = b[f] + Σ_{c,k} W[f,c,k]·x[c, t+k−⌊K/2⌋]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::Real;
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Valid output range `[t_lo, t_hi)` for kernel tap `k` with half-width `half`.
#[inline]
fn tap_range(k: usize, half: usize, len: usize) -> (usize, usize, isize) {
    let shift = k as isize - half as isize;
    let t_lo = ((-shift).max(0) as usize).min(len);
    let t_hi = (len as isize - shift).min(len as isize).max(0) as usize;
    (t_lo, t_hi.max(t_lo), shift)
}

fn check_len(op: &'static str, what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch {
            op,
            detail: format!("{what}: expected {want} values, got {got}"),
        });
    }
    Ok(())
}

/// Forward 1-D convolution. `x` is `[c_in, len]`, `w` is `[c_out, c_in, k]`.
pub fn conv1d_forward<T: Real>(x: &[T], c_in: usize, len: usize, w: &[T], b: &[T], c_out: usize, k: usize) -> Result<Vec<T>> {
    if k.is_multiple_of(2) {
        return Err(Error::ShapeMismatch {
            op: "conv1d",
            detail: format!("kernel size {k} must be odd"),
        });
    }
    check_len("conv1d", "input", x.len(), c_in * len)?;
    check_len("conv1d", "weights", w.len(), c_out * c_in * k)?;
    check_len("conv1d", "bias", b.len(), c_out)?;
    let half = k / 2;
    let mut out = vec![T::zero(); c_out * len];
    for f in 0..c_out {
        let row = &mut out[f * len..(f + 1) * len];
        row.iter_mut().for_each(|v| *v = b[f]);
        for c in 0..c_in {
            let xc = &x[c * len..(c + 1) * len];
            let wfc = &w[(f * c_in + c) * k..(f * c_in + c + 1) * k];
            for (tap, &wv) in wfc.iter().enumerate() {
                let (lo, hi, shift) = tap_range(tap, half, len);
                if lo == hi {
                    continue;
                }
                let src = &xc[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                for (o, &s) in row[lo..hi].iter_mut().zip(src) {
                    *o += wv * s;
                }
            }
        }
    }
    Ok(out)
}

/// Backward 1-D convolution; accumulates into `dw`, `db` and returns `dx`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<T: Real>(
    x: &[T],
    c_in: usize,
    len: usize,
    w: &[T],
    c_out: usize,
    k: usize,
    dy: &[T],
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Vec<T> {
    let half = k / 2;
    let mut dx = if need_dx { vec![T::zero(); c_in * len] } else { Vec::new() };
    for f in 0..c_out {
        let dyf = &dy[f * len..(f + 1) * len];
        db[f] += dyf.iter().copied().sum::<T>();
        for c in 0..c_in {
            let xc = &x[c * len..(c + 1) * len];
            let base = (f * c_in + c) * k;
            for tap in 0..k {
                let (lo, hi, shift) = tap_range(tap, half, len);
                if lo == hi {
                    continue;
                }
                let s_lo = (lo as isize + shift) as usize;
                let s_hi = (hi as isize + shift) as usize;
                let src = &xc[s_lo..s_hi];
                let g = &dyf[lo..hi];
                dw[base + tap] += g.iter().zip(src).map(|(&a, &b)| a * b).sum::<T>();
                if need_dx {
                    let wv = w[base + tap];
                    for (d, &gv) in dx[c * len + s_lo..c * len + s_hi].iter_mut().zip(g) {
                        *d += wv * gv;
                    }
                }
            }
        }
    }
    dx
}

/// Non-overlapping max-pool of size `pool` on `[c, len]`; the trailing
/// remainder is dropped. Returns the pooled values and the source index of
/// each maximum.
pub fn maxpool1d_forward<T: Real>(x: &[T], c: usize, len: usize, pool: usize) -> Result<(Vec<T>, Vec<usize>)> {
    if pool == 0 || pool > len {
        return Err(Error::ShapeMismatch {
            op: "maxpool1d",
            detail: format!("pool size {pool} invalid for length {len}"),
        });
    }
    check_len("maxpool1d", "input", x.len(), c * len)?;
    let out_len = len / pool;
    let mut out = Vec::with_capacity(c * out_len);
    let mut idx = Vec::with_capacity(c * out_len);
    for ch in 0..c {
        for o in 0..out_len {
            let start = ch * len + o * pool;
            let mut best = start;
            for i in start + 1..start + pool {
                if x[i] > x[best] {
                    best = i;
                }
            }
            out.push(x[best]);
            idx.push(best);
        }
    }
    Ok((out, idx))
}

/// Routes each pooled gradient back to the position of its maximum.
pub fn maxpool1d_backward<T: Real>(dy: &[T], argmax: &[usize], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&g, &i) in dy.iter().zip(argmax) {
        dx[i] += g;
    }
    dx
}

pub fn relu_forward<T: Real>(x: &mut [T]) {
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `dy` where the ReLU output was zero.
pub fn relu_backward<T: Real>(y: &[T], dy: &mut [T]) {
    for (g, &v) in dy.iter_mut().zip(y) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
}

pub fn relu<T: Real>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// `y = W·x + b` with `W` shaped `[out, in]`.
pub fn dense_forward<T: Real>(x: &[T], w: &[T], b: &[T], out: usize) -> Result<Vec<T>> {
    let n_in = x.len();
    check_len("dense", "weights", w.len(), out * n_in)?;
    check_len("dense", "bias", b.len(), out)?;
    Ok((0..out)
        .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(&a, &v)| a * v).sum::<T>())
        .collect())
}

/// Accumulates `dW += dy ⊗ x`, `db += dy`; returns `Wᵀ·dy`.
pub fn dense_backward<T: Real>(x: &[T], w: &[T], dy: &[T], dw: &mut [T], db: &mut [T], need_dx: bool) -> Vec<T> {
    let n_in = x.len();
    let mut dx = if need_dx { vec![T::zero(); n_in] } else { Vec::new() };
    for (o, &g) in dy.iter().enumerate() {
        db[o] += g;
        let row = o * n_in..(o + 1) * n_in;
        for (d, &v) in dw[row.clone()].iter_mut().zip(x) {
            *d += g * v;
        }
        if need_dx {
            for (d, &wv) in dx.iter_mut().zip(&w[row]) {
                *d += g * wv;
            }
        }
    }
    dx
}

/// Inverted-dropout mask: each unit is kept with probability `1 − p` and
/// scaled by `1 / (1 − p)`; dropped units get 0.
pub fn dropout_mask<T: Real>(n: usize, p: f64, rng: &mut StreamRng) -> Vec<T> {
    if p <= 0.0 {
        return vec![T::one(); n];
    }
    let keep = T::lit(1.0 / (1.0 - p));
    (0..n)
        .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
        .collect()
}

/// Applies dropout in training mode; identity otherwise.
pub fn dropout_forward<T: Real>(x: &mut [T], p: f64, train: bool, rng: &mut StreamRng) -> Vec<T> {
    if !train || p <= 0.0 {
        return vec![T::one(); x.len()];
    }
    let mask = dropout_mask(x.len(), p, rng);
    for (v, &m) in x.iter_mut().zip(&mask) {
        *v *= m;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 5, 5);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    // triple loop straight from the definition
    fn naive_conv(x: &[f64], c_in: usize, len: usize, w: &[f64], b: &[f64], c_out: usize, k: usize) -> Vec<f64> {
        let half = k as isize / 2;
        let mut out = vec![0.0; c_out * len];
        for f in 0..c_out {
            for t in 0..len {
                let mut acc = b[f];
                for c in 0..c_in {
                    for kk in 0..k {
                        let s = t as isize + kk as isize - half;
                        if s >= 0 && (s as usize) < len {
                            acc += w[(f * c_in + c) * k + kk] * x[c * len + s as usize];
                        }
                    }
                }
                out[f * len + t] = acc;
            }
        }
        out
    }

    #[test]
    fn conv_hand_example() {
        let y = conv1d_forward(&[1.0, 2.0, 3.0], 1, 3, &[1.0, 0.0, -1.0], &[0.0], 1, 3).unwrap();
        // center output: 1·1 + 0·2 − 1·3
        assert_eq!(y[1], -2.0);
    }

    #[test]
    fn conv_identity_kernel() {
        let x = randn(20, 1);
        let y = conv1d_forward(&x, 1, 20, &[0.0, 0.0, 1.0, 0.0, 0.0], &[0.0], 1, 5).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_matches_naive_loop() {
        for (c_in, c_out, len, k, seed) in [(3, 4, 17, 5, 1), (1, 2, 3, 7, 2), (5, 3, 40, 3, 3), (2, 2, 1, 3, 4), (2, 3, 1, 5, 5), (1, 1, 2, 7, 6)] {
            let x = randn(c_in * len, seed);
            let w = randn(c_out * c_in * k, seed + 10);
            let b = randn(c_out, seed + 20);
            let fast = conv1d_forward(&x, c_in, len, &w, &b, c_out, k).unwrap();
            let slow = naive_conv(&x, c_in, len, &w, &b, c_out, k);
            for (a, s) in fast.iter().zip(&slow) {
                assert!((a - s).abs() <= 1e-12 * s.abs().max(1.0));
            }
        }
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        assert!(conv1d_forward(&[1.0; 4], 1, 4, &[1.0; 4], &[0.0], 1, 4).is_err());
        assert!(conv1d_forward(&[1.0; 4], 1, 4, &[1.0; 2], &[0.0], 1, 3).is_err());
        assert!(conv1d_forward(&[1.0; 3], 1, 4, &[1.0; 3], &[0.0], 1, 3).is_err());
    }

    #[test]
    fn maxpool_examples() {
        let (y, idx) = maxpool1d_forward(&[1.0, 3.0, 2.0, 5.0, 4.0], 1, 5, 2).unwrap();
        assert_eq!(y, vec![3.0, 5.0]);
        assert_eq!(idx, vec![1, 3]);
        let x = randn(12, 3);
        assert_eq!(maxpool1d_forward(&x, 2, 6, 1).unwrap().0, x);
        assert!(maxpool1d_forward(&x, 2, 6, 7).is_err());
    }

    #[test]
    fn maxpool_matches_naive() {
        let (c, len, p) = (3, 23, 4);
        let x = randn(c * len, 9);
        let (y, _) = maxpool1d_forward(&x, c, len, p).unwrap();
        let mut want = Vec::new();
        for ch in 0..c {
            for o in 0..len / p {
                let w = &x[ch * len + o * p..ch * len + (o + 1) * p];
                want.push(w.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
        assert_eq!(y, want);
    }

    #[test]
    fn relu_values() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.0), 2.0);
    }

    #[test]
    fn dropout_statistics() {
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let mut rng = substream(1, 2, 3);
        let mut y = x.clone();
        assert_eq!(dropout_forward(&mut y, 0.0, true, &mut rng), vec![1.0; n]);
        assert_eq!(y, x);
        let mut y = x.clone();
        dropout_forward(&mut y, 0.5, false, &mut rng);
        assert_eq!(y, x);
        let mut y = x.clone();
        let mask = dropout_forward(&mut y, 0.5, true, &mut rng);
        let kept = mask.iter().filter(|m| **m > 0.0).count() as f64 / n as f64;
        assert!((kept - 0.5).abs() < 0.01, "kept {kept}");
        let (mx, my) = (x.iter().sum::<f64>() / n as f64, y.iter().sum::<f64>() / n as f64);
        assert!((my / mx - 1.0).abs() < 0.02);
    }
}
