//! 16-bit PCM mono WAV files.

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32768.0;

/// Reads a mono 16-bit PCM file as samples in `[-1, 1)`.
///
/// With `expected_rate` set, any other sample rate is an error.
pub fn read_wav(path: &Path, expected_rate: Option<u32>) -> Result<(Vec<f64>, u32)> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, format!("malformed WAV header: {other}")),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(
            path,
            format!("unsupported channel count {} (one file per microphone expected)", spec.channels),
        ));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::format(
            path,
            format!(
                "unsupported encoding: {:?} {} bits (16-bit PCM expected)",
                spec.sample_format, spec.bits_per_sample
            ),
        ));
    }
    if let Some(rate) = expected_rate {
        if spec.sample_rate != rate {
            return Err(Error::format(path, format!("sample rate {} Hz, expected {rate} Hz", spec.sample_rate)));
        }
    }
    let declared = reader.len() as usize;
    let mut out = Vec::with_capacity(declared);
    for s in reader.into_samples::<i16>() {
        match s {
            Ok(v) => out.push(v as f64 / FULL_SCALE),
            Err(_) => {
                let start = data_offset(path).unwrap_or(0);
                return Err(Error::format(
                    path,
                    format!(
                        "payload truncated at byte {} (header declares {} bytes of samples ending at byte {})",
                        start + 2 * out.len() as u64,
                        2 * declared,
                        start + 2 * declared as u64
                    ),
                ));
            }
        }
    }
    Ok((out, spec.sample_rate))
}

/// Byte offset of the first sample, found by walking the RIFF chunks.
fn data_offset(path: &Path) -> Option<u64> {
    let mut f = BufReader::new(File::open(path).ok()?);
    f.seek(SeekFrom::Start(12)).ok()?;
    let mut pos = 12u64;
    loop {
        let mut hdr = [0u8; 8];
        f.read_exact(&mut hdr).ok()?;
        let size = u32::from_le_bytes(hdr[4..8].try_into().ok()?) as u64;
        pos += 8;
        if &hdr[..4] == b"data" {
            return Some(pos);
        }
        let skip = size + (size & 1);
        f.seek(SeekFrom::Current(skip as i64)).ok()?;
        pos += skip;
    }
}

/// Writes samples as 16-bit PCM, rounding to the nearest code and clipping
/// to the representable range.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &v in samples {
        let code = (v * FULL_SCALE).round().clamp(-FULL_SCALE, FULL_SCALE - 1.0) as i16;
        w.write_sample(code).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn handmade(channels: u16, bits: u16, payload: &[u8], declared: u32) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + declared).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&16_000u32.to_le_bytes());
        let block = channels * bits / 8;
        b.extend_from_slice(&(16_000 * block as u32).to_le_bytes());
        b.extend_from_slice(&block.to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&declared.to_le_bytes());
        b.extend_from_slice(payload);
        b
    }

    fn pcm(samples: &[i16]) -> Vec<u8> {
        samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    #[test]
    fn four_sample_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        std::fs::write(&p, handmade(1, 16, &pcm(&[0, 16384, -32768, 32767]), 8)).unwrap();
        let (x, rate) = read_wav(&p, Some(16_000)).unwrap();
        assert_eq!(rate, 16_000);
        assert_eq!(x, vec![0.0, 0.5, -1.0, 32767.0 / 32768.0]);
        assert!(read_wav(&p, Some(8_000)).is_err());
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        std::fs::write(&p, handmade(2, 16, &pcm(&[1, 2, 3, 4]), 8)).unwrap();
        let msg = read_wav(&p, None).unwrap_err().to_string();
        assert!(msg.contains("channel count 2"), "{msg}");
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        std::fs::write(&p, handmade(1, 16, &pcm(&[1, 2, 3]), 16)).unwrap();
        let msg = read_wav(&p, None).unwrap_err().to_string();
        assert!(msg.contains("truncated at byte 50"), "{msg}");
    }

    #[test]
    fn missing_file_is_missing_input() {
        let e = read_wav(Path::new("/nonexistent/x.wav"), None).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::exit::MISSING_INPUT);
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        let x: Vec<f64> = (-300..300).map(|k| (k * 109) as f64 / 32768.0).collect();
        write_wav(&p, &x, 16_000).unwrap();
        assert_eq!(read_wav(&p, Some(16_000)).unwrap().0, x);
    }
}
