use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout_forward, maxpool1d_backward,
    maxpool1d_forward, relu_backward, relu_forward,
};
use super::{Real, Tensor};
use crate::geometry::Position;
use crate::hash::Hasher;
use crate::rng::{domain, substream, StreamRng};
use crate::signal::MultichannelWindow;
use crate::{Error, Result};

/// One convolutional block: conv → ReLU → optional max-pool with pool size
/// equal to the kernel size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel: usize,
    pub pool: bool,
}

impl ConvBlock {
    pub const fn new(filters: usize, kernel: usize, pool: bool) -> Self {
        ConvBlock { filters, kernel, pool }
    }
}

/// Filter counts and kernel sizes of the reference network. The last block
/// has no pooling, which keeps the flattened length positive at 80 ms.
pub const REFERENCE_BLOCKS: [ConvBlock; 5] = [
    ConvBlock::new(96, 7, true),
    ConvBlock::new(96, 7, true),
    ConvBlock::new(128, 5, true),
    ConvBlock::new(128, 5, true),
    ConvBlock::new(128, 3, false),
];
pub const REFERENCE_HIDDEN: usize = 500;
pub const REFERENCE_DROPOUT: f64 = 0.5;

/// Topology of the regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub input_len: usize,
    pub blocks: Vec<ConvBlock>,
    pub hidden: usize,
    pub output: usize,
    /// Dropout probability after the hidden layer.
    pub dropout: f64,
}

/// Output shape of one stage, for logging the shape chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub channels: usize,
    pub len: usize,
}

impl NetworkSpec {
    /// The reference topology for an `m`-channel, `n`-sample input.
    pub fn reference_topology(m: usize, n: usize) -> Result<Self> {
        let spec = NetworkSpec {
            input_channels: m,
            input_len: n,
            blocks: REFERENCE_BLOCKS.to_vec(),
            hidden: REFERENCE_HIDDEN,
            output: 3,
            dropout: REFERENCE_DROPOUT,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every stage and returns the shape chain, input first.
    pub fn shapes(&self) -> Result<Vec<LayerShape>> {
        if self.input_channels == 0 || self.input_len == 0 {
            return Err(Error::InvalidNetwork("empty input".into()));
        }
        if self.blocks.is_empty() || self.hidden == 0 || self.output == 0 {
            return Err(Error::InvalidNetwork("need at least one block, a hidden layer and an output".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidNetwork(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        let mut out = vec![LayerShape {
            name: "input".into(),
            channels: self.input_channels,
            len: self.input_len,
        }];
        let mut len = self.input_len;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.filters == 0 || b.kernel == 0 || b.kernel % 2 == 0 {
                return Err(Error::InvalidNetwork(format!(
                    "block {}: {} filters of size {} (kernel must be odd)",
                    i + 1,
                    b.filters,
                    b.kernel
                )));
            }
            out.push(LayerShape {
                name: format!("conv{}", i + 1),
                channels: b.filters,
                len,
            });
            if b.pool {
                if b.kernel > len {
                    return Err(Error::InvalidNetwork(format!(
                        "block {}: pool {} exceeds length {len}",
                        i + 1,
                        b.kernel
                    )));
                }
                len /= b.kernel;
                out.push(LayerShape {
                    name: format!("pool{}", i + 1),
                    channels: b.filters,
                    len,
                });
            }
        }
        let flat = out.last().map(|s| s.channels * s.len).unwrap_or(0);
        out.push(LayerShape {
            name: "flatten".into(),
            channels: 1,
            len: flat,
        });
        out.push(LayerShape {
            name: "hidden".into(),
            channels: 1,
            len: self.hidden,
        });
        out.push(LayerShape {
            name: "output".into(),
            channels: 1,
            len: self.output,
        });
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Length of the flattened conv output feeding the hidden layer.
    pub fn flatten_dim(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(shapes[shapes.len() - 3].len)
    }

    /// Shapes of all parameter tensors in storage order: per block the
    /// kernel `[filters, in, k]` and bias, then hidden and output layers.
    pub fn param_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let flat = self.flatten_dim()?;
        let mut shapes = Vec::new();
        let mut c_in = self.input_channels;
        for b in &self.blocks {
            shapes.push(vec![b.filters, c_in, b.kernel]);
            shapes.push(vec![b.filters]);
            c_in = b.filters;
        }
        shapes.push(vec![self.hidden, flat]);
        shapes.push(vec![self.hidden]);
        shapes.push(vec![self.output, self.hidden]);
        shapes.push(vec![self.output]);
        Ok(shapes)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.param_shapes()?.iter().map(|s| s.iter().product::<usize>()).sum())
    }

    /// Human-readable shape chain, e.g. `input 4x1280 -> conv1 96x1280 -> ...`.
    pub fn describe(&self) -> Result<String> {
        let parts: Vec<String> = self
            .shapes()?
            .iter()
            .map(|s| format!("{} {}x{}", s.name, s.channels, s.len))
            .collect();
        Ok(parts.join(" -> "))
    }

    /// Hash of everything that determines parameter layout and semantics.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Hasher::new();
        h.bytes(b"srcloc-net-v1")
            .u64(self.input_channels as u64)
            .u64(self.input_len as u64)
            .u64(self.blocks.len() as u64);
        for b in &self.blocks {
            h.u64(b.filters as u64).u64(b.kernel as u64).u64(b.pool as u64);
        }
        h.u64(self.hidden as u64).u64(self.output as u64).f64(self.dropout);
        h.finish_u64()
    }
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input to each conv block.
    conv_in: Vec<Vec<T>>,
    /// Post-ReLU conv output of each block (before pooling).
    conv_out: Vec<Vec<T>>,
    argmax: Vec<Vec<usize>>,
    flat: Vec<T>,
    /// Post-ReLU hidden activations before dropout.
    hidden: Vec<T>,
    mask: Vec<T>,
    /// Hidden activations after dropout, fed to the output layer.
    dropped: Vec<T>,
    pub output: Vec<T>,
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Gradients {
            tensors: net.params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.axpy(T::one(), b);
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for t in self.tensors.iter_mut() {
            t.scale(alpha);
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors.iter_mut() {
            t.fill(T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(
            self.tensors
                .iter()
                .flat_map(|t| t.data().iter())
                .map(|v| {
                    let x = v.as_f64();
                    x * x
                })
                .sum(),
        )
    }
}

/// A network: its spec plus parameters in [`NetworkSpec::param_shapes`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    params: Vec<Tensor<T>>,
}

impl<T: Real> Network<T> {
    /// All parameters zero.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let params = spec.param_shapes()?.iter().map(|s| Tensor::zeros(s)).collect();
        Ok(Network { spec, params })
    }

    /// Seeded initialization: fan-in scaled normal weights (He for the
    /// ReLU layers, LeCun for the linear output), zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let n_layers = net.params.len() / 2;
        for layer in 0..n_layers {
            let w = &mut net.params[2 * layer];
            let fan_in: usize = w.shape()[1..].iter().product();
            let gain = if layer + 1 == n_layers { 1.0 } else { 2.0 };
            let std = libm::sqrt(gain / fan_in as f64);
            let mut rng = substream(seed, domain::INIT, layer as u64);
            for v in w.data_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = T::lit(std * z);
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from raw parameter tensors.
    pub fn from_params(spec: NetworkSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        let shapes = spec.param_shapes()?;
        if shapes.len() != params.len() || shapes.iter().zip(&params).any(|(s, p)| s.as_slice() != p.shape()) {
            return Err(Error::ShapeMismatch {
                op: "Network::from_params",
                detail: format!("parameter tensors do not match {}", spec.describe()?),
            });
        }
        Ok(Network { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
        }
    }

    /// Forward pass keeping everything the backward pass needs.
    ///
    /// `input` is channel-major `[M, N]`. In [`Mode::Train`] dropout draws
    /// from `rng`, which must then be provided.
    pub fn forward_cached(&self, input: &[T], mode: Mode, rng: Option<&mut StreamRng>) -> Result<ForwardCache<T>> {
        let spec = &self.spec;
        if input.len() != spec.input_channels * spec.input_len {
            return Err(Error::ShapeMismatch {
                op: "forward",
                detail: format!(
                    "expected {}x{} input, got {} values",
                    spec.input_channels,
                    spec.input_len,
                    input.len()
                ),
            });
        }
        let mut conv_in = Vec::with_capacity(spec.blocks.len());
        let mut conv_out = Vec::with_capacity(spec.blocks.len());
        let mut argmax = Vec::with_capacity(spec.blocks.len());
        let mut x = input.to_vec();
        let (mut c, mut len) = (spec.input_channels, spec.input_len);
        for (i, b) in spec.blocks.iter().enumerate() {
            let mut y = conv1d_forward(&x, c, len, self.params[2 * i].data(), self.params[2 * i + 1].data(), b.filters, b.kernel)?;
            relu_forward(&mut y);
            conv_in.push(x);
            c = b.filters;
            if b.pool {
                let (p, idx) = maxpool1d_forward(&y, c, len, b.kernel)?;
                len /= b.kernel;
                conv_out.push(y);
                argmax.push(idx);
                x = p;
            } else {
                x = y.clone();
                conv_out.push(y);
                argmax.push(Vec::new());
            }
        }
        let nb = spec.blocks.len();
        let flat = x;
        let mut hidden = dense_forward(&flat, self.params[2 * nb].data(), self.params[2 * nb + 1].data(), spec.hidden)?;
        relu_forward(&mut hidden);
        let mut dropped = hidden.clone();
        let mask = match mode {
            Mode::Train if spec.dropout > 0.0 => {
                let rng = rng.ok_or_else(|| Error::InvalidConfig("training-mode forward needs a dropout stream".into()))?;
                dropout_forward(&mut dropped, spec.dropout, true, rng)
            }
            _ => Vec::new(),
        };
        let output = dense_forward(
            &dropped,
            self.params[2 * nb + 2].data(),
            self.params[2 * nb + 3].data(),
            spec.output,
        )?;
        if output.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output"));
        }
        Ok(ForwardCache {
            conv_in,
            conv_out,
            argmax,
            flat,
            hidden,
            mask,
            dropped,
            output,
        })
    }

    /// Inference-mode forward pass.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(input, Mode::Inference, None)?.output)
    }

    /// Localizes one window.
    pub fn predict(&self, window: &MultichannelWindow) -> Result<Position> {
        if self.spec.output != 3 {
            return Err(Error::InvalidNetwork(format!("{} outputs, need 3", self.spec.output)));
        }
        if window.channels() != self.spec.input_channels || window.len() != self.spec.input_len {
            return Err(Error::ShapeMismatch {
                op: "predict",
                detail: format!(
                    "window is {}x{}, network expects {}x{}",
                    window.channels(),
                    window.len(),
                    self.spec.input_channels,
                    self.spec.input_len
                ),
            });
        }
        let x: Vec<T> = window.as_flat().iter().map(|&v| T::lit(v)).collect();
        let y = self.forward(&x)?;
        Ok(Position::new(y[0].as_f64(), y[1].as_f64(), y[2].as_f64()))
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the output is `d_out`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_out: &[T], grads: &mut Gradients<T>) -> Result<()> {
        let spec = &self.spec;
        if d_out.len() != spec.output {
            return Err(Error::ShapeMismatch {
                op: "backward",
                detail: format!("output gradient has {} values, expected {}", d_out.len(), spec.output),
            });
        }
        let nb = spec.blocks.len();
        let g = &mut grads.tensors;
        let (head, tail) = g.split_at_mut(2 * nb + 2);
        let (ow, ob) = tail.split_at_mut(1);
        let mut dh = dense_backward(
            &cache.dropped,
            self.params[2 * nb + 2].data(),
            d_out,
            ow[0].data_mut(),
            ob[0].data_mut(),
            true,
        );
        if !cache.mask.is_empty() {
            for (d, &m) in dh.iter_mut().zip(&cache.mask) {
                *d *= m;
            }
        }
        relu_backward(&cache.hidden, &mut dh);
        let (conv_g, dense_g) = head.split_at_mut(2 * nb);
        let (hw, hb) = dense_g.split_at_mut(1);
        let mut dx = dense_backward(
            &cache.flat,
            self.params[2 * nb].data(),
            &dh,
            hw[0].data_mut(),
            hb[0].data_mut(),
            true,
        );
        for i in (0..nb).rev() {
            let b = spec.blocks[i];
            let len = cache.conv_out[i].len() / b.filters;
            let mut dy = if b.pool {
                maxpool1d_backward(&dx, &cache.argmax[i], b.filters * len)
            } else {
                dx
            };
            relu_backward(&cache.conv_out[i], &mut dy);
            let c_in = if i == 0 { spec.input_channels } else { spec.blocks[i - 1].filters };
            let (gw, gb) = conv_g[2 * i..2 * i + 2].split_at_mut(1);
            dx = conv1d_backward(
                &cache.conv_in[i],
                c_in,
                len,
                self.params[2 * i].data(),
                b.filters,
                b.kernel,
                &dy,
                gw[0].data_mut(),
                gb[0].data_mut(),
                i > 0,
            );
        }
        Ok(())
    }
}
