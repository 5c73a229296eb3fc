//! Parameter snapshots and their `ASLC` byte encoding.
//!
//! Layout, all little-endian: magic `ASLC`, `u32` version, the topology
//! descriptor and its fingerprint, lineage, one `f32` blob per parameter
//! tensor in storage order, then optionally an `ADAM` tag followed by the
//! step count, hyperparameters and both moment buffers.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::{Adam, AdamConfig, ConvBlock, Network, NetworkSpec, Real, Tensor};
use crate::hash::Hasher;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"ASLC";
const ADAM_TAG: &[u8; 4] = b"ADAM";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Where a checkpoint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Lineage {
    pub seed: u64,
    pub config_hash: u64,
    /// Content hash of the checkpoint this one was trained from.
    pub parent: Option<[u8; 32]>,
}

/// Optimizer state stored alongside the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Vec<Vec<f32>>,
    pub adam: Option<AdamState>,
    pub lineage: Lineage,
}

fn to_f32<T: Real>(v: &[T]) -> Vec<f32> {
    v.iter().map(|x| x.as_f64() as f32).collect()
}

fn from_f32<T: Real>(v: &[f32]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x as f64)).collect()
}

impl Checkpoint {
    pub fn from_network<T: Real>(net: &Network<T>, adam: Option<&Adam<T>>, lineage: Lineage) -> Self {
        Checkpoint {
            spec: net.spec().clone(),
            params: net.params().iter().map(|p| to_f32(p.data())).collect(),
            adam: adam.map(|a| AdamState {
                config: a.config,
                step: a.step,
                m: a.m.iter().map(|x| to_f32(x)).collect(),
                v: a.v.iter().map(|x| to_f32(x)).collect(),
            }),
            lineage,
        }
    }

    pub fn network<T: Real>(&self) -> Result<Network<T>> {
        let shapes = self.spec.param_shapes()?;
        if shapes.len() != self.params.len() {
            return Err(Error::Corrupt(format!(
                "{} parameter tensors, topology needs {}",
                self.params.len(),
                shapes.len()
            )));
        }
        let params = shapes
            .iter()
            .zip(&self.params)
            .map(|(s, p)| Tensor::from_vec(s, from_f32(p)))
            .collect::<Result<Vec<_>>>()?;
        Network::from_params(self.spec.clone(), params)
    }

    pub fn optimizer<T: Real>(&self) -> Option<Adam<T>> {
        self.adam.as_ref().map(|a| Adam {
            config: a.config,
            step: a.step,
            m: a.m.iter().map(|x| from_f32(x)).collect(),
            v: a.v.iter().map(|x| from_f32(x)).collect(),
        })
    }

    /// Fails unless this checkpoint was built for `expected`'s topology.
    pub fn check_topology(&self, expected: &NetworkSpec) -> Result<()> {
        let (e, f) = (expected.fingerprint(), self.spec.fingerprint());
        if e != f {
            return Err(Error::FingerprintMismatch { expected: e, found: f });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        put_u32(&mut w, CHECKPOINT_VERSION);
        let s = &self.spec;
        put_u32(&mut w, s.input_channels as u32);
        put_u32(&mut w, s.input_len as u32);
        put_u32(&mut w, s.blocks.len() as u32);
        for b in &s.blocks {
            put_u32(&mut w, b.filters as u32);
            put_u32(&mut w, b.kernel as u32);
            w.push(b.pool as u8);
        }
        put_u32(&mut w, s.hidden as u32);
        put_u32(&mut w, s.output as u32);
        w.extend_from_slice(&s.dropout.to_le_bytes());
        w.extend_from_slice(&s.fingerprint().to_le_bytes());
        w.extend_from_slice(&self.lineage.seed.to_le_bytes());
        w.extend_from_slice(&self.lineage.config_hash.to_le_bytes());
        match &self.lineage.parent {
            Some(h) => {
                w.push(1);
                w.extend_from_slice(h);
            }
            None => w.push(0),
        }
        put_blobs(&mut w, &self.params);
        if let Some(a) = &self.adam {
            w.extend_from_slice(ADAM_TAG);
            w.extend_from_slice(&a.step.to_le_bytes());
            for v in [a.config.learning_rate, a.config.beta1, a.config.beta2, a.config.epsilon] {
                w.extend_from_slice(&v.to_le_bytes());
            }
            put_blobs(&mut w, &a.m);
            put_blobs(&mut w, &a.v);
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Corrupt("missing ASLC magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Corrupt(format!("unsupported version {version}")));
        }
        let input_channels = r.u32()? as usize;
        let input_len = r.u32()? as usize;
        let n_blocks = r.u32()? as usize;
        if n_blocks > 1024 {
            return Err(Error::Corrupt(format!("{n_blocks} blocks")));
        }
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let filters = r.u32()? as usize;
            let kernel = r.u32()? as usize;
            let pool = r.u8()? != 0;
            blocks.push(ConvBlock { filters, kernel, pool });
        }
        let spec = NetworkSpec {
            input_channels,
            input_len,
            blocks,
            hidden: r.u32()? as usize,
            output: r.u32()? as usize,
            dropout: r.f64()?,
        };
        spec.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
        let stored = r.u64()?;
        if stored != spec.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: spec.fingerprint(),
                found: stored,
            });
        }
        let seed = r.u64()?;
        let config_hash = r.u64()?;
        let parent = match r.u8()? {
            0 => None,
            1 => Some(r.take(32)?.try_into().expect("32 bytes")),
            x => return Err(Error::Corrupt(format!("parent flag {x}"))),
        };
        let shapes = spec.param_shapes()?;
        let params = r.blobs(&shapes)?;
        let adam = if r.pos == bytes.len() {
            None
        } else {
            if r.take(4)? != ADAM_TAG {
                return Err(Error::Corrupt(format!("unknown section at byte {}", r.pos - 4)));
            }
            let step = r.u64()?;
            let config = AdamConfig {
                learning_rate: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                epsilon: r.f64()?,
            };
            let m = r.blobs(&shapes)?;
            let v = r.blobs(&shapes)?;
            Some(AdamState { config, step, m, v })
        };
        if r.pos != bytes.len() {
            return Err(Error::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint {
            spec,
            params,
            adam,
            lineage: Lineage {
                seed,
                config_hash,
                parent,
            },
        })
    }

    /// SHA-256 of the encoded checkpoint.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Hasher::new();
        h.bytes(&self.to_bytes());
        h.finish()
    }
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_blobs(w: &mut Vec<u8>, blobs: &[Vec<f32>]) {
    put_u32(w, blobs.len() as u32);
    for b in blobs {
        put_u32(w, b.len() as u32);
        for v in b {
            w.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Corrupt(format!(
                "truncated at byte {}: need {n} more bytes",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn blobs(&mut self, shapes: &[Vec<usize>]) -> Result<Vec<Vec<f32>>> {
        let n = self.u32()? as usize;
        if n != shapes.len() {
            return Err(Error::Corrupt(format!("{n} tensors, topology needs {}", shapes.len())));
        }
        let mut out = Vec::with_capacity(n);
        for (i, s) in shapes.iter().enumerate() {
            let len = self.u32()? as usize;
            let want: usize = s.iter().product();
            if len != want {
                return Err(Error::Corrupt(format!("tensor {i} has {len} values, expected {want}")));
            }
            let raw = self.take(len * 4)?;
            out.push(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            );
        }
        Ok(out)
    }
}
