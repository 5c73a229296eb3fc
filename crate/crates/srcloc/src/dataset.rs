//! ASLD dataset cache: a header followed by fixed-size records.
//!
//! Header: `"ASLD"`, version (u32), M (u32), N (u32), sample rate (f64).
//! Record: target x, y, z (3 × f64), then M × N f32 samples channel-major.
//! All values little-endian.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use srcloc_core::geometry::Position;
use srcloc_core::signal::{LabeledExample, MultichannelWindow};
use srcloc_core::train::ExampleSet;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ASLD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

/// Examples held in memory with the f32 precision of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: usize,
    pub len: usize,
    pub sample_rate: f64,
    pub targets: Vec<Position>,
    /// `targets.len() × channels × len` samples.
    pub samples: Vec<f32>,
}

impl Dataset {
    pub fn new(channels: usize, len: usize, sample_rate: f64) -> Self {
        Dataset {
            channels,
            len,
            sample_rate,
            targets: Vec::new(),
            samples: Vec::new(),
        }
    }

    pub fn from_examples(examples: &[LabeledExample]) -> Result<Self> {
        let first = examples.first().ok_or_else(|| Error::Config("no examples to store".into()))?;
        let mut d = Dataset::new(first.window.channels(), first.window.len(), first.window.sample_rate());
        for ex in examples {
            d.push(&ex.window, ex.target)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, w: &MultichannelWindow, target: Position) -> Result<()> {
        if w.channels() != self.channels || w.len() != self.len {
            return Err(Error::Config(format!(
                "window {}x{} does not match dataset {}x{}",
                w.channels(),
                w.len(),
                self.channels,
                self.len
            )));
        }
        self.targets.push(target);
        self.samples.extend(w.as_flat().iter().map(|&v| v as f32));
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.targets.len()
    }

    fn record_len(&self) -> usize {
        self.channels * self.len
    }

    pub fn record(&self, i: usize) -> &[f32] {
        let r = self.record_len();
        &self.samples[i * r..(i + 1) * r]
    }

    pub fn window(&self, i: usize) -> MultichannelWindow {
        let data = self.record(i).iter().map(|&v| v as f64).collect();
        MultichannelWindow::from_flat(data, self.channels, self.len, self.sample_rate).expect("shape checked on insert")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.records() * (24 + 4 * self.record_len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        out.extend_from_slice(&(self.len as u32).to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        for i in 0..self.records() {
            for v in self.targets[i].to_array() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in self.record(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(origin, m);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the ASLD header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("not an ASLD file (bad magic)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(bad(format!("unsupported ASLD version {version}")));
        }
        let (m, n) = (u32_at(8) as usize, u32_at(12) as usize);
        let fs = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if m == 0 || n == 0 || fs.is_nan() || fs <= 0.0 {
            return Err(bad(format!("invalid header M={m} N={n} fs={fs}")));
        }
        let rec = 24 + 4 * m * n;
        let body = &bytes[HEADER_LEN..];
        if !body.len().is_multiple_of(rec) {
            let k = body.len() / rec;
            return Err(bad(format!(
                "truncated record {} at byte {}",
                k,
                HEADER_LEN + k * rec
            )));
        }
        let mut d = Dataset::new(m, n, fs);
        for chunk in body.chunks_exact(rec) {
            let f = |o: usize| f64::from_le_bytes(chunk[o..o + 8].try_into().unwrap());
            let p = Position::new(f(0), f(8), f(16));
            d.targets.push(p);
            d.samples
                .extend(chunk[24..].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())));
        }
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        w.write_all(&self.to_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(f).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

impl ExampleSet for Dataset {
    fn len(&self) -> usize {
        self.records()
    }

    fn get(&self, index: usize) -> srcloc_core::Result<(Vec<f64>, Position)> {
        Ok((self.record(index).iter().map(|&v| v as f64).collect(), self.targets[index]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let mut d = Dataset::new(2, 3, 16_000.0);
        let w = MultichannelWindow::new(vec![vec![0.5, -0.25, 1.0], vec![0.0, 0.125, -1.0]], 16_000.0).unwrap();
        d.push(&w, Position::new(1.0, 2.0, 1.5)).unwrap();
        d.push(&w, Position::new(0.1, 0.2, 0.3)).unwrap();
        d
    }

    #[test]
    fn layout_matches_the_format() {
        let b = sample().to_bytes();
        assert_eq!(&b[..4], b"ASLD");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 3);
        assert_eq!(b.len(), 24 + 2 * (24 + 4 * 6));
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 1.0);
        assert_eq!(f32::from_le_bytes(b[48..52].try_into().unwrap()), 0.5);
    }

    #[test]
    fn round_trip() {
        let d = sample();
        let back = Dataset::from_bytes(&d.to_bytes(), Path::new("x")).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.window(1).channel(1), &[0.0, 0.125, -1.0]);
    }

    #[test]
    fn truncation_and_magic_are_reported() {
        let b = sample().to_bytes();
        let e = Dataset::from_bytes(&b[..b.len() - 3], Path::new("x")).unwrap_err();
        assert!(e.to_string().contains("truncated record 1 at byte 72"), "{e}");
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Dataset::from_bytes(&bad, Path::new("x")).is_err());
    }
}
