//! Skip-connection denoising autoencoder: model, objectives, training loop,
//! inference and checkpoints.

mod checkpoint;
mod loss;
mod model;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{
    dependence_terms, loss_cdesk, loss_cdsk, loss_mse, objective_on_tape, objective_value, DependenceTerms,
    TapeObjective,
};
pub use model::{ForwardOutput, ModelDims, SkDaeModel, TapeForward, LAYER_NAMES};
pub use train::{objective_gradients, train, EpochReport, LayerGradients, TrainOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{stack_context_with_radius, FeatureMatrix};

/// Which objective a model is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Reconstruction error only.
    #[serde(rename = "SK-DAE")]
    SkDae,
    /// Linear distance-correlation penalty.
    #[serde(rename = "CDSK-DAE")]
    CdskDae,
    /// Linear plus squared ("energy") penalty.
    #[serde(rename = "CDESK-DAE")]
    CdeskDae,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SkDae, Variant::CdskDae, Variant::CdeskDae];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SkDae => "SK-DAE",
            Variant::CdskDae => "CDSK-DAE",
            Variant::CdeskDae => "CDESK-DAE",
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Variant::SkDae => 0,
            Variant::CdskDae => 1,
            Variant::CdeskDae => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Variant::SkDae),
            1 => Ok(Variant::CdskDae),
            2 => Ok(Variant::CdeskDae),
            other => Err(Error::Format(format!("unknown variant tag {other}"))),
        }
    }

    /// Default penalty weights (β, σ) for the variant.
    pub fn default_weights(self) -> (f64, f64) {
        match self {
            Variant::SkDae => (0.0, 0.0),
            Variant::CdskDae => (0.01, 0.0),
            Variant::CdeskDae => (0.01, 0.01),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "skdae" | "skddae" => Ok(Variant::SkDae),
            "cdskdae" => Ok(Variant::CdskDae),
            "cdeskdae" => Ok(Variant::CdeskDae),
            _ => Err(Error::InvalidInput(format!(
                "unknown variant {s:?} (expected SK-DAE, CDSK-DAE or CDESK-DAE)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub beta: f64,
    pub sigma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
}

impl TrainConfig {
    /// Reference recipe: Adam at 1e-3, batches of 500, 16 epochs.
    pub fn for_variant(variant: Variant) -> Self {
        let (beta, sigma) = variant.default_weights();
        Self {
            beta,
            sigma,
            lr: 1e-3,
            batch_size: 500,
            epochs: 16,
            seed: 0,
            variant,
        }
    }

    /// Checks weights against the variant: SK-DAE has no penalty, CDSK-DAE only
    /// the linear one, CDESK-DAE a positive energy weight.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            problems.push(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            problems.push(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if self.batch_size < 2 {
            problems.push(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        match self.variant {
            Variant::SkDae if self.beta != 0.0 || self.sigma != 0.0 => {
                problems.push("SK-DAE requires beta = sigma = 0".into())
            }
            Variant::CdskDae if !(self.beta > 0.0) || self.sigma != 0.0 => {
                problems.push("CDSK-DAE requires beta > 0 and sigma = 0".into())
            }
            Variant::CdeskDae if !(self.sigma > 0.0) => {
                problems.push("CDESK-DAE requires sigma > 0".into())
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }
}

/// Enhanced center-frame features for every frame of a normalized utterance.
///
/// The result keeps the input's normalization metadata so it can be mapped
/// back to the log-Mel domain.
pub fn enhance(model: &SkDaeModel, noisy: &FeatureMatrix) -> Result<FeatureMatrix> {
    let norm = noisy
        .normalization()
        .ok_or_else(|| Error::Contract("enhance expects normalized features".into()))?;
    let dims = model.dims();
    if noisy.dim() != dims.feature_dim {
        return Err(Error::Dimension(format!(
            "model works on {}-dim frames, got {}",
            dims.feature_dim,
            noisy.dim()
        )));
    }
    let windows = stack_context_with_radius(noisy, noisy, dims.context_frames / 2)?;
    let out = model.forward(&windows)?;
    FeatureMatrix::normalized(out.output, norm.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Normalization;
    use ndarray::Array2;

    #[test]
    fn variant_parsing_and_tags() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(Variant::from_tag(v.tag()).unwrap(), v);
        }
        assert_eq!("sk-ddae".parse::<Variant>().unwrap(), Variant::SkDae);
        assert!("foo".parse::<Variant>().is_err());
        assert_eq!(serde_json::to_string(&Variant::CdskDae).unwrap(), "\"CDSK-DAE\"");
    }

    #[test]
    fn config_consistency() {
        for v in Variant::ALL {
            TrainConfig::for_variant(v).validate().unwrap();
        }
        let mut c = TrainConfig::for_variant(Variant::SkDae);
        c.beta = 0.01;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::for_variant(Variant::CdskDae);
        c.sigma = 0.01;
        c.lr = -1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("lr") && msg.contains("CDSK"), "{msg}");
    }

    #[test]
    fn enhance_shape_and_contract() {
        let dims = ModelDims::mirrored(40, 11, [8, 6, 4]);
        let model = SkDaeModel::new(dims, 3).unwrap();
        let frames = Array2::from_shape_fn((9, 40), |(t, j)| ((t + j) % 7) as f64 / 6.0);
        let norm = Normalization {
            min: vec![-3.0; 40],
            max: vec![2.0; 40],
        };
        let noisy = FeatureMatrix::normalized(frames.clone(), norm.clone()).unwrap();
        let out = enhance(&model, &noisy).unwrap();
        assert_eq!(out.frames().dim(), (9, 40));
        assert_eq!(out.normalization(), Some(&norm));
        let raw = FeatureMatrix::raw(frames).unwrap();
        assert!(matches!(enhance(&model, &raw), Err(Error::Contract(_))));
    }
}
