//! Central finite-difference verification of the analytic gradients.

use alloc::vec::Vec;

use rand::Rng;

use super::{Gradients, Mode, Network};
use crate::rng::{domain, substream};
use crate::Result;

/// Agreement between analytic and numeric derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Worst (tensor, element) seen.
    pub worst: (usize, usize),
}

/// `Σ_b ‖f(x_b) − q_b‖²` with dropout masks fixed by `dropout_seed`.
fn loss(net: &Network<f64>, inputs: &[Vec<f64>], targets: &[[f64; 3]], dropout_seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for (b, (x, q)) in inputs.iter().zip(targets).enumerate() {
        let mut rng = substream(dropout_seed, domain::DROPOUT, b as u64);
        let y = net.forward_cached(x, Mode::Train, Some(&mut rng))?.output;
        total += y.iter().zip(q).map(|(s, t)| (s - t) * (s - t)).sum::<f64>();
    }
    Ok(total)
}

/// Analytic gradient of the same loss.
pub fn analytic(net: &Network<f64>, inputs: &[Vec<f64>], targets: &[[f64; 3]], dropout_seed: u64) -> Result<Gradients<f64>> {
    let mut grads = Gradients::zeros_like(net);
    for (b, (x, q)) in inputs.iter().zip(targets).enumerate() {
        let mut rng = substream(dropout_seed, domain::DROPOUT, b as u64);
        let cache = net.forward_cached(x, Mode::Train, Some(&mut rng))?;
        let d: Vec<f64> = cache.output.iter().zip(q).map(|(s, t)| 2.0 * (s - t)).collect();
        net.backward(&cache, &d, &mut grads)?;
    }
    Ok(grads)
}

/// Compares analytic and central-difference derivatives of the summed
/// squared error. With `per_tensor = None` every parameter is checked;
/// otherwise that many elements of each tensor are drawn at random.
///
/// The relative error is `|a − n| / max(|a|, |n|)`; pairs where both are
/// below `floor` count as agreeing when their difference is below
/// `floor · 1e-2`.
pub fn check(
    net: &Network<f64>,
    inputs: &[Vec<f64>],
    targets: &[[f64; 3]],
    h: f64,
    per_tensor: Option<usize>,
    floor: f64,
    seed: u64,
) -> Result<GradCheck> {
    let grads = analytic(net, inputs, targets, seed)?;
    let mut probe = net.clone();
    let mut out = GradCheck::default();
    let mut pick = substream(seed, domain::VALIDATION, 0);
    for t in 0..net.params().len() {
        let n = net.params()[t].len();
        let elements: Vec<usize> = match per_tensor {
            Some(k) if k < n => (0..k).map(|_| pick.random_range(0..n)).collect(),
            _ => (0..n).collect(),
        };
        for e in elements {
            let orig = net.params()[t].data()[e];
            probe.params_mut()[t].data_mut()[e] = orig + h;
            let lp = loss(&probe, inputs, targets, seed)?;
            probe.params_mut()[t].data_mut()[e] = orig - h;
            let lm = loss(&probe, inputs, targets, seed)?;
            probe.params_mut()[t].data_mut()[e] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let a = grads.tensors[t].data()[e];
            let scale = a.abs().max(numeric.abs());
            let rel = if scale < floor {
                if (a - numeric).abs() < floor * 1e-2 {
                    0.0
                } else {
                    1.0
                }
            } else {
                (a - numeric).abs() / scale
            };
            out.checked += 1;
            if rel > out.max_rel_error {
                out.max_rel_error = rel;
                out.worst = (t, e);
            }
        }
    }
    Ok(out)
}
