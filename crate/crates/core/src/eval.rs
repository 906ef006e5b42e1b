//! Enhancement metrics and dependence diagnostics.
//!
//! CSV schemas:
//!
//! ```text
//! trajectory:  epoch,loss,mse,dcor_latent,dcor_output
//! report:      checkpoint_id,corpus_id,noise_type,snr_db,utterances,frames,mse_enhanced,mse_noisy,dcor_enhanced_clean
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dcor::{dcor, SampleMatrix};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::skdae::EpochReport;

/// Frames used per side for corpus-level dCor.
pub const DCOR_SAMPLE_SIZE: usize = 500;

pub const TRAJECTORY_HEADER: [&str; 5] = ["epoch", "loss", "mse", "dcor_latent", "dcor_output"];

/// One utterance of an evaluation condition.
#[derive(Debug, Clone, Copy)]
pub struct EvalItem<'a> {
    pub noise_type: &'a str,
    pub snr_db: f64,
    pub enhanced: &'a FeatureMatrix,
    pub noisy: &'a FeatureMatrix,
    pub clean: &'a FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub noise_type: String,
    pub snr_db: f64,
    pub utterances: usize,
    pub frames: usize,
    /// Mean over frames of ‖x̂ − x‖².
    pub mse_enhanced: f64,
    /// Mean over frames of ‖x̃ − x‖².
    pub mse_noisy: f64,
    pub dcor_enhanced_clean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub checkpoint_id: String,
    pub corpus_id: String,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record([
            "checkpoint_id",
            "corpus_id",
            "noise_type",
            "snr_db",
            "utterances",
            "frames",
            "mse_enhanced",
            "mse_noisy",
            "dcor_enhanced_clean",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                self.checkpoint_id.clone(),
                self.corpus_id.clone(),
                r.noise_type.clone(),
                r.snr_db.to_string(),
                r.utterances.to_string(),
                r.frames.to_string(),
                r.mse_enhanced.to_string(),
                r.mse_noisy.to_string(),
                r.dcor_enhanced_clean.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("csv: {other:?}")),
    }
}

/// Sum of squared frame distances.
fn squared_error_sum(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sorted, deterministic subset of `min(n, total)` row indices.
pub fn subsample_indices(total: usize, n: usize, seed: u64) -> Vec<usize> {
    if n >= total {
        return (0..total).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, total, n).into_vec();
    idx.sort_unstable();
    idx
}

fn subsample(m: &Array2<f64>, n: usize, seed: u64) -> Result<SampleMatrix> {
    let idx = subsample_indices(m.nrows(), n, seed);
    SampleMatrix::new(m.select(Axis(0), &idx))
}

/// Per-(noise type, SNR) means, sorted by noise type then SNR.
///
/// Frames are pooled across the condition's utterances. The dCor column uses
/// the same seeded row subset for enhanced and clean.
pub fn feature_mse_report(items: &[EvalItem<'_>], seed: u64) -> Result<Vec<EvalRow>> {
    let mut keys: Vec<(&str, f64)> = Vec::new();
    for (i, it) in items.iter().enumerate() {
        let (t, d) = (it.clean.num_frames(), it.clean.dim());
        if it.enhanced.frames().dim() != (t, d) || it.noisy.frames().dim() != (t, d) {
            return Err(Error::Dimension(format!(
                "item {i} ({} @ {} dB): enhanced {:?}, noisy {:?}, clean {:?}",
                it.noise_type,
                it.snr_db,
                it.enhanced.frames().dim(),
                it.noisy.frames().dim(),
                (t, d)
            )));
        }
        if !it.snr_db.is_finite() {
            return Err(Error::InvalidInput(format!("item {i}: SNR {} is not finite", it.snr_db)));
        }
        if !keys.iter().any(|&(n, s)| n == it.noise_type && s == it.snr_db) {
            keys.push((it.noise_type, it.snr_db));
        }
    }
    keys.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));

    keys.into_iter()
        .map(|(noise_type, snr_db)| {
            let members: Vec<&EvalItem> = items
                .iter()
                .filter(|it| it.noise_type == noise_type && it.snr_db == snr_db)
                .collect();
            let frames: usize = members.iter().map(|it| it.clean.num_frames()).sum();
            if frames < 2 {
                return Err(Error::DegenerateSample(format!(
                    "{noise_type} @ {snr_db} dB has {frames} frame(s)"
                )));
            }
            let mut enh_sum = 0.0;
            let mut noisy_sum = 0.0;
            for it in &members {
                enh_sum += squared_error_sum(it.enhanced.frames().view(), it.clean.frames().view());
                noisy_sum += squared_error_sum(it.noisy.frames().view(), it.clean.frames().view());
            }
            let enh_views: Vec<_> = members.iter().map(|it| it.enhanced.frames().view()).collect();
            let clean_views: Vec<_> = members.iter().map(|it| it.clean.frames().view()).collect();
            let enh = concatenate(Axis(0), &enh_views).expect("dims checked");
            let clean = concatenate(Axis(0), &clean_views).expect("dims checked");
            let r = dcor(
                &subsample(&enh, DCOR_SAMPLE_SIZE, seed)?,
                &subsample(&clean, DCOR_SAMPLE_SIZE, seed)?,
            )?;
            Ok(EvalRow {
                noise_type: noise_type.to_string(),
                snr_db,
                utterances: members.len(),
                frames,
                mse_enhanced: enh_sum / frames as f64,
                mse_noisy: noisy_sum / frames as f64,
                dcor_enhanced_clean: r,
            })
        })
        .collect()
}

/// dCor between any two frame sets after subsampling both to a common size.
///
/// The common size is `min(n, frames(a), frames(b))`; each side's subset
/// depends only on its own frame count, the common size and the seed.
pub fn signal_dcor(a: &Array2<f64>, b: &Array2<f64>, n: usize, seed: u64) -> Result<f64> {
    if a.nrows() < 2 || b.nrows() < 2 {
        return Err(Error::DegenerateSample(format!(
            "dCor needs at least 2 frames per side, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("sample size must be >= 2, got {n}")));
    }
    let common = n.min(a.nrows()).min(b.nrows());
    dcor(&subsample(a, common, seed)?, &subsample(b, common, seed)?)
}

/// `table[i][j] = dCor(A_i, B_j)`.
pub fn signal_dcor_table(a: &[FeatureMatrix], b: &[FeatureMatrix], n: usize, seed: u64) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((a.len(), b.len()));
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[[i, j]] = signal_dcor(x.frames(), y.frames(), n, seed)?;
        }
    }
    Ok(out)
}

pub fn training_trajectory_csv(reports: &[EpochReport], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no epoch reports to write".into()));
    }
    let mut w = csv_writer(path)?;
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.epoch.to_string(),
            r.loss.to_string(),
            r.mse.to_string(),
            r.dcor_latent.to_string(),
            r.dcor_output.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_training_trajectory(path: &Path) -> Result<Vec<EpochReport>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::Format(format!("unexpected trajectory header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
