//! Binary checkpoint, little-endian:
//!
//! ```text
//! magic       4 bytes "SKDA"
//! version     u32     1
//! beta        f64
//! sigma       f64
//! lr          f64
//! variant     u32     0 = SK-DAE, 1 = CDSK-DAE, 2 = CDESK-DAE
//! batch_size  u32
//! epochs      u32
//! seed        u64
//! layers      u32     7
//! per layer:  out u32, in u32, weight out·in f32 (row-major), bias out f32
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::model::SkDaeModel;
use super::{TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::nn::DenseLayer;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SKDA";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &SkDaeModel, cfg: &TrainConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * model.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&cfg.beta.to_le_bytes());
    out.extend_from_slice(&cfg.sigma.to_le_bytes());
    out.extend_from_slice(&cfg.lr.to_le_bytes());
    out.extend_from_slice(&cfg.variant.tag().to_le_bytes());
    out.extend_from_slice(&(cfg.batch_size as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.epochs as u32).to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.fan_out() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.fan_in() as u32).to_le_bytes());
        for v in layer.weight.iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.bytes.len() - self.pos < N {
            return Err(Error::Format(format!(
                "checkpoint truncated at offset {} (file has {} bytes)",
                self.pos,
                self.bytes.len()
            )));
        }
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(4)
            .filter(|&l| l <= self.bytes.len() - self.pos)
            .ok_or_else(|| {
                Error::Format(format!(
                    "checkpoint truncated: {n} floats requested at offset {}",
                    self.pos
                ))
            })?;
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(SkDaeModel, TrainConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an SKDA checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let beta = r.f64()?;
    let sigma = r.f64()?;
    let lr = r.f64()?;
    let variant = Variant::from_tag(r.u32()?)?;
    let batch_size = r.u32()? as usize;
    let epochs = r.u32()? as usize;
    let seed = r.u64()?;
    let n_layers = r.u32()? as usize;
    if n_layers != 7 {
        return Err(Error::Format(format!("expected 7 layers, header says {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let out = r.u32()? as usize;
        let fan_in = r.u32()? as usize;
        let count = out
            .checked_mul(fan_in)
            .ok_or_else(|| Error::Format("layer size overflow".into()))?;
        let w = r.f32s(count)?;
        let b = r.f32s(out)?;
        let weight = Array2::from_shape_vec((out, fan_in), w).expect("length checked");
        let bias = Array2::from_shape_vec((1, out), b).expect("length checked");
        layers.push(DenseLayer::new(weight, bias)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.pos
        )));
    }
    let model = SkDaeModel::infer_from_layers(layers)?;
    let cfg = TrainConfig {
        beta,
        sigma,
        lr,
        batch_size,
        epochs,
        seed,
        variant,
    };
    Ok((model, cfg))
}

/// Writes to a temporary sibling then renames, so a crash never leaves half a checkpoint.
pub fn save_checkpoint(model: &SkDaeModel, cfg: &TrainConfig, path: &Path) -> Result<()> {
    let tmp = path.with_extension("skda.tmp");
    fs::write(&tmp, encode_checkpoint(model, cfg))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(SkDaeModel, TrainConfig)> {
    let bytes = fs::read(path)?;
    decode_checkpoint(&bytes)
}
