//! Core algorithms for end-to-end acoustic source localization.
//!
//! This crate is `no_std` (it needs `alloc`) and carries no IO. It covers
//! the whole numerical pipeline:
//!
//! - [`geometry`]: positions, room and microphone-array layout, propagation delays.
//! - [`signal`]: semi-synthetic multichannel window generation (fractional
//!   delays, per-channel gains, tone and white-noise contamination).
//! - [`dsp`]: GCC-PHAT and the SRP-PHAT grid-search baseline.
//! - [`nn`]: a small 1-D convolutional network with hand-written backprop and Adam.
//! - [`train`]: pretraining, fine-tuning and from-scratch schedules.
//! - [`realdata`]: windows extracted from recorded sequences and their annotations.
//! - [`metrics`]: MOTP, relative improvement and result matrices.
//!
//! File formats, WAV ingestion and the command line live in the `srcloc` crate.

#![no_std]

extern crate alloc;

pub mod dsp;
mod error;
pub mod fft;
pub mod geometry;
pub mod hash;
pub mod metrics;
pub mod nn;
pub mod realdata;
pub mod rng;
pub mod signal;
pub mod speech;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, Position, SourceBox};
pub use signal::MultichannelWindow;
