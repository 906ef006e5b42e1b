//! Audio and feature file formats.
//!
//! Feature files (`.dcdf`) are little-endian:
//!
//! ```text
//! magic    4 bytes  "DCDF"
//! version  u32      1
//! T        u32      frame count
//! D        u32      feature dimension
//! frames   T·D f32  row-major
//! norm_min D f32
//! norm_max D f32
//! ```
//!
//! Unnormalized matrices store NaN in both normalization vectors.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{FeatureMatrix, Normalization, Utterance};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"DCDF";
pub const FEATURE_VERSION: u32 = 1;
pub const REQUIRED_SAMPLE_RATE: u32 = 16_000;

/// Reads a mono 16-bit integer or 32-bit float WAV recorded at 16 kHz.
pub fn read_wav(path: &Path) -> Result<Utterance> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate != REQUIRED_SAMPLE_RATE {
        return Err(Error::UnsupportedAudio(format!(
            "{}: sample rate {} Hz, expected {} Hz (resample first)",
            path.display(),
            spec.sample_rate,
            REQUIRED_SAMPLE_RATE
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::UnsupportedAudio(format!(
                "{}: {bits}-bit {fmt:?} samples, expected 16-bit int or 32-bit float",
                path.display()
            )))
        }
    };
    Utterance::new(samples, spec.sample_rate)
}

/// Writes a mono 32-bit float WAV.
pub fn write_wav(path: &Path, u: &Utterance) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: u.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &u.samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Writes a mono 16-bit PCM WAV, clipping to [-1, 1).
pub fn write_wav_i16(path: &Path, u: &Utterance) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: u.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &u.samples {
        writer.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    let (t, d) = f.frames().dim();
    let mut out = Vec::with_capacity(16 + 4 * (t * d + 2 * d));
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for v in f.frames().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let (min, max) = match f.normalization() {
        Some(n) => (n.min.clone(), n.max.clone()),
        None => (vec![f64::NAN; d], vec![f64::NAN; d]),
    };
    for v in min.iter().chain(&max) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::Format(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != FEATURE_MAGIC {
        return Err(Error::Format("not a DCDF feature file".into()));
    }
    let version = cur.u32()?;
    if version != FEATURE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let t = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    let values = cur.f32s(t.checked_mul(d).ok_or_else(|| Error::Format("size overflow".into()))?)?;
    let min = cur.f32s(d)?;
    let max = cur.f32s(d)?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after feature payload",
            bytes.len() - cur.pos
        )));
    }
    let frames = Array2::from_shape_vec((t, d), values).expect("length checked");
    let has_norm = min.iter().chain(&max).all(|v| v.is_finite());
    let has_nan = min.iter().chain(&max).all(|v| v.is_nan());
    match (has_norm, has_nan) {
        (true, _) => FeatureMatrix::normalized(frames, Normalization { min, max }),
        (false, true) => FeatureMatrix::raw(frames),
        _ => Err(Error::Format("partially missing normalization vectors".into())),
    }
}

pub fn write_features(path: &Path, f: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_features(f))?;
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_features(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// CSV export: header `frame,f0,…,f{D-1}`, one row per frame.
pub fn write_features_csv(path: &Path, f: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["frame".to_string()];
    header.extend((0..f.dim()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, row) in f.frames().rows().into_iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV matrix. A first row that does not parse as numbers is
/// treated as a header; a leading `frame` column is dropped.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut skip_first_col = false;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parsed: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                let v = if skip_first_col { v[1..].to_vec() } else { v };
                rows.push(v)
            }
            Err(_) if i == 0 => {
                skip_first_col = rec.get(0).map(|s| s.trim() == "frame").unwrap_or(false);
            }
            Err(e) => {
                return Err(Error::Format(format!("{} row {}: {e}", path.display(), i + 1)));
            }
        }
    }
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.is_empty() || d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Format(format!("{}: empty or ragged matrix", path.display())));
    }
    let n = rows.len();
    Ok(Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).expect("rectangular"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
