//! Log-Mel front end: framing, filterbank energies, per-utterance scaling,
//! context stacking and noise mixing.

mod context;
pub mod io;
mod mel;
mod mix;

pub use context::{stack_context, stack_context_with_radius, ContextWindowBatch, CONTEXT_RADIUS};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterbank};
pub use mix::{measured_snr_db, mean_power, mix_at_snr, Mixture};

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Number of log-Mel dimensions per frame.
pub const N_MELS: usize = 40;

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Utterance {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite audio sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Short-time analysis parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    /// Analysis window length in samples (25 ms at 16 kHz).
    pub window: usize,
    /// Hop between frames in samples (10 ms at 16 kHz).
    pub hop: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub f_min: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub f_max: Option<f64>,
    /// Added to filterbank energies before the log.
    pub log_floor: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window: 400,
            hop: 160,
            fft_size: 512,
            n_mels: N_MELS,
            f_min: 0.0,
            f_max: None,
            log_floor: 1e-10,
        }
    }
}

impl AnalysisConfig {
    pub fn frame_count(&self, samples: usize) -> Option<usize> {
        (samples >= self.window).then(|| (samples - self.window) / self.hop + 1)
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hop == 0 || self.n_mels == 0 {
            return Err(Error::InvalidInput(
                "window, hop and filter count must be positive".into(),
            ));
        }
        if self.fft_size < self.window {
            return Err(Error::InvalidInput(format!(
                "fft size {} shorter than window {}",
                self.fft_size, self.window
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidInput("log floor must be positive".into()));
        }
        Ok(())
    }
}

/// Min/max per dimension used to map features into [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// T frames of D-dimensional features, optionally min-max normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: Array2<f64>,
    normalization: Option<Normalization>,
}

impl FeatureMatrix {
    /// Wraps raw (unnormalized) features.
    pub fn raw(frames: Array2<f64>) -> Result<Self> {
        Self::check_frames(&frames)?;
        Ok(Self {
            frames,
            normalization: None,
        })
    }

    /// Wraps features already scaled by `normalization`; entries must lie in [0, 1].
    pub fn normalized(frames: Array2<f64>, normalization: Normalization) -> Result<Self> {
        Self::check_frames(&frames)?;
        let d = frames.ncols();
        if normalization.min.len() != d || normalization.max.len() != d {
            return Err(Error::Dimension(format!(
                "normalization vectors must have {d} entries"
            )));
        }
        if frames.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract(
                "normalized features must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            frames,
            normalization: Some(normalization),
        })
    }

    fn check_frames(frames: &Array2<f64>) -> Result<()> {
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return Err(Error::InvalidInput("feature matrix needs at least one frame".into()));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(())
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    /// Maps every dimension onto [0, 1] by its own min and max over the utterance.
    /// Dimensions with zero range map to 0.5.
    pub fn normalize(&self) -> Result<FeatureMatrix> {
        if self.is_normalized() {
            return Err(Error::Contract("features are already normalized".into()));
        }
        let d = self.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in self.frames.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let mut frames = self.frames.clone();
        for mut row in frames.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let range = max[j] - min[j];
                *v = if range > 0.0 { (*v - min[j]) / range } else { 0.5 };
            }
        }
        Ok(FeatureMatrix {
            frames,
            normalization: Some(Normalization { min, max }),
        })
    }

    /// Inverse of [`normalize`](Self::normalize). Zero-range dimensions return their constant.
    pub fn denormalize(&self) -> Result<FeatureMatrix> {
        let norm = self
            .normalization
            .as_ref()
            .ok_or_else(|| Error::Contract("features are not normalized".into()))?;
        let mut frames = self.frames.clone();
        for mut row in frames.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let range = norm.max[j] - norm.min[j];
                *v = if range > 0.0 {
                    *v * range + norm.min[j]
                } else {
                    norm.min[j]
                };
            }
        }
        FeatureMatrix::raw(frames)
    }
}

/// Framed power-spectrum analyser with a cached FFT plan and filterbank.
pub struct LogMelExtractor {
    cfg: AnalysisConfig,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    filterbank: MelFilterbank,
}

impl LogMelExtractor {
    pub fn new(cfg: AnalysisConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
        let window = hamming(cfg.window);
        let nyquist = cfg.sample_rate as f64 / 2.0;
        let filterbank = MelFilterbank::new(
            cfg.n_mels,
            cfg.fft_size,
            cfg.sample_rate,
            cfg.f_min,
            cfg.f_max.unwrap_or(nyquist),
        )?;
        Ok(Self {
            cfg,
            fft,
            window,
            filterbank,
        })
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Unnormalized log filterbank energies, one row per hop.
    pub fn extract(&self, u: &Utterance) -> Result<FeatureMatrix> {
        if u.sample_rate != self.cfg.sample_rate {
            return Err(Error::UnsupportedAudio(format!(
                "sample rate {} Hz, analysis expects {} Hz",
                u.sample_rate, self.cfg.sample_rate
            )));
        }
        let t = self.cfg.frame_count(u.len()).ok_or(Error::TooShort {
            samples: u.len(),
            window: self.cfg.window,
        })?;
        let n_bins = self.cfg.fft_size / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); self.cfg.fft_size];
        let mut power = vec![0.0; n_bins];
        let mut out = Array2::<f64>::zeros((t, self.cfg.n_mels));
        for (frame, mut row) in out.rows_mut().into_iter().enumerate() {
            let start = frame * self.cfg.hop;
            let chunk = &u.samples[start..start + self.cfg.window];
            for (slot, (s, w)) in buf.iter_mut().zip(chunk.iter().zip(&self.window)) {
                *slot = Complex::new(s * w, 0.0);
            }
            for slot in buf.iter_mut().skip(self.cfg.window) {
                *slot = Complex::new(0.0, 0.0);
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (m, v) in row.iter_mut().enumerate() {
                let energy: f64 = self
                    .filterbank
                    .weights()
                    .row(m)
                    .iter()
                    .zip(&power)
                    .map(|(w, p)| w * p)
                    .sum();
                *v = (energy + self.cfg.log_floor).ln();
            }
        }
        FeatureMatrix::raw(out)
    }
}

/// One-shot extraction; prefer [`LogMelExtractor`] when processing a corpus.
pub fn log_mel_features(u: &Utterance, cfg: &AnalysisConfig) -> Result<FeatureMatrix> {
    LogMelExtractor::new(cfg.clone())?.extract(u)
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
        .collect()
}
