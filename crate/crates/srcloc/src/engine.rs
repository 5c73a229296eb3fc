//! Thread-pool gradient engine.

use rayon::prelude::*;
use srcloc_core::train::{GradientEngine, Sequential};

/// Runs items on the rayon pool; results keep index order, so gradients
/// match [`Sequential`] bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl GradientEngine for Parallel {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R> {
        (0..n).into_par_iter().map(&f).collect()
    }
}

/// Engine picked at run time from `--deterministic`.
#[derive(Debug, Clone, Copy)]
pub enum Engine {
    Sequential,
    Parallel,
}

impl Engine {
    pub fn new(deterministic: bool) -> Self {
        if deterministic {
            Engine::Sequential
        } else {
            Engine::Parallel
        }
    }
}

impl GradientEngine for Engine {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R> {
        match self {
            Engine::Sequential => Sequential.map(n, f),
            Engine::Parallel => Parallel.map(n, f),
        }
    }
}
