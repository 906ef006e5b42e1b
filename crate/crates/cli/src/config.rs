//! Training run configuration (TOML).
//!
//! ```toml
//! clean_dir = "corpus/clean"       # WAV files, 16 kHz mono
//! noise_dir = "corpus/noise"       # every WAV in it is a noise type
//! noise_files = []                 # or list them explicitly
//! snr_db = [0, 5, 10, 20]
//! out_dir = "runs/cdsk"
//! seed = 7
//!
//! [train]
//! variant = "CDSK-DAE"             # SK-DAE | CDSK-DAE | CDESK-DAE
//! beta = 0.01                      # defaults depend on the variant
//! sigma = 0.0
//! lr = 0.001
//! batch_size = 500
//! epochs = 16
//!
//! [model]
//! encoder = [512, 256, 128]        # decoder mirrors it unless given
//! decoder = [128, 256, 512]
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use cdsk::features::{CONTEXT_RADIUS, N_MELS};
use cdsk::skdae::{ModelDims, TrainConfig, Variant};
use log::warn;
use serde::Deserialize;

use crate::files::list_with_extension;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub clean_dir: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
    #[serde(default)]
    pub noise_files: Vec<PathBuf>,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub model: ModelSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub variant: Option<String>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub encoder: Option<[usize; 3]>,
    pub decoder: Option<[usize; 3]>,
}

/// Everything a training run needs, after validation.
#[derive(Debug)]
pub struct ResolvedRun {
    pub clean_files: Vec<PathBuf>,
    pub noise_files: Vec<PathBuf>,
    pub snrs_db: Vec<f64>,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    pub dims: ModelDims,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.clean_dir.as_mut().map(rebase);
        cfg.noise_dir.as_mut().map(rebase);
        cfg.out_dir.as_mut().map(rebase);
        cfg.noise_files.iter_mut().for_each(rebase);
        Ok(cfg)
    }

    /// Checks everything at once and reports every problem found.
    pub fn resolve(&self) -> Result<ResolvedRun, Vec<String>> {
        let mut problems = Vec::new();

        let clean_files = match &self.clean_dir {
            None => {
                problems.push("clean_dir is not set".to_string());
                Vec::new()
            }
            Some(d) if !d.is_dir() => {
                problems.push(format!("clean_dir {} does not exist", d.display()));
                Vec::new()
            }
            Some(d) => match list_with_extension(d, "wav") {
                Ok((files, _)) if files.is_empty() => {
                    problems.push(format!("clean_dir {} has no .wav files", d.display()));
                    files
                }
                Ok((files, _)) => files,
                Err(e) => {
                    problems.push(format!("clean_dir {}: {e}", d.display()));
                    Vec::new()
                }
            },
        };

        let mut noise_files = Vec::new();
        if let Some(d) = &self.noise_dir {
            if d.is_dir() {
                match list_with_extension(d, "wav") {
                    Ok((files, _)) => noise_files.extend(files),
                    Err(e) => problems.push(format!("noise_dir {}: {e}", d.display())),
                }
            } else {
                problems.push(format!("noise_dir {} does not exist", d.display()));
            }
        }
        for f in &self.noise_files {
            if f.is_file() {
                noise_files.push(f.clone());
            } else {
                problems.push(format!("noise file {} does not exist", f.display()));
            }
        }
        if noise_files.is_empty() && (self.noise_dir.is_some() || !self.noise_files.is_empty()) {
            problems.push("no noise WAVs found".into());
        } else if self.noise_dir.is_none() && self.noise_files.is_empty() {
            problems.push("set noise_dir or noise_files".into());
        }

        if self.snr_db.is_empty() {
            problems.push("snr_db list is empty".into());
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            problems.push(format!("snr_db entry {bad} is not finite"));
        }

        let out_dir = self.out_dir.clone().unwrap_or_else(|| {
            problems.push("out_dir is not set".into());
            PathBuf::new()
        });

        let variant = match self.train.variant.as_deref().unwrap_or("SK-DAE").parse::<Variant>() {
            Ok(v) => v,
            Err(e) => {
                problems.push(e.to_string());
                Variant::SkDae
            }
        };
        let mut train = TrainConfig::for_variant(variant);
        train.seed = self.seed.unwrap_or(0);
        if variant == Variant::SkDae {
            if self.train.beta.unwrap_or(0.0) != 0.0 || self.train.sigma.unwrap_or(0.0) != 0.0 {
                warn!("SK-DAE has no dependence penalty; beta and sigma forced to 0");
            }
        } else {
            train.beta = self.train.beta.unwrap_or(train.beta);
            train.sigma = self.train.sigma.unwrap_or(train.sigma);
        }
        train.lr = self.train.lr.unwrap_or(train.lr);
        train.batch_size = self.train.batch_size.unwrap_or(train.batch_size);
        train.epochs = self.train.epochs.unwrap_or(train.epochs);
        if train.epochs == 0 {
            problems.push("epochs must be >= 1".into());
        }
        if let Err(e) = train.validate() {
            problems.push(e.to_string());
        }

        let encoder = self.model.encoder.unwrap_or([512, 256, 128]);
        let mut dims = ModelDims::mirrored(N_MELS, 2 * CONTEXT_RADIUS + 1, encoder);
        if let Some(dec) = self.model.decoder {
            dims.decoder = dec;
        }
        if dims.encoder.iter().chain(&dims.decoder).any(|&u| u == 0) {
            problems.push("layer sizes must be positive".into());
        }

        if problems.is_empty() {
            Ok(ResolvedRun {
                clean_files,
                noise_files,
                snrs_db: self.snr_db.clone(),
                out_dir,
                train,
                dims,
            })
        } else {
            Err(problems)
        }
    }
}
