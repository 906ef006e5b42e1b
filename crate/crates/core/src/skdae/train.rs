use log::{debug, info};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::objective_on_tape;
use super::model::SkDaeModel;
use super::TrainConfig;
use crate::dcor::{dcor, SampleMatrix};
use crate::error::{Error, Result};
use crate::features::ContextWindowBatch;
use crate::nn::{AdamConfig, AdamState, Tape};
use crate::seed;

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Mean objective over the epoch's rows.
    pub loss: f64,
    pub mse: f64,
    /// Batch mean of dCor(z, x).
    pub dcor_latent: f64,
    /// Batch mean of dCor(x̂, x).
    pub dcor_output: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SkDaeModel,
    pub reports: Vec<EpochReport>,
}

/// (weight, bias) gradient of one layer.
pub type LayerGradients = (Array2<f64>, Array2<f64>);

/// Loss value and per-layer gradients on one batch.
pub fn objective_gradients(
    model: &SkDaeModel,
    batch: &ContextWindowBatch,
    beta: f64,
    sigma: f64,
) -> Result<(f64, Vec<LayerGradients>)> {
    let mut tape = Tape::new();
    let fwd = model.forward_on_tape(&mut tape, &batch.inputs, &batch.center_frames)?;
    let obj = objective_on_tape(&mut tape, fwd.output, fwd.latent, &batch.targets, beta, sigma)?;
    let grads = tape.backward(obj.loss)?;
    let per_layer = fwd
        .params
        .iter()
        .zip(model.layers())
        .map(|(vars, layer)| {
            (
                grads.get_or_zeros(vars.weight, &layer.weight),
                grads.get_or_zeros(vars.bias, &layer.bias),
            )
        })
        .collect();
    Ok((tape.scalar(obj.loss), per_layer))
}

fn batch_dcor(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    dcor(&SampleMatrix::new(a.clone())?, &SampleMatrix::new(b.clone())?)
}

/// Minibatch Adam over `data`, reshuffled every epoch from the config seed.
///
/// A trailing batch with fewer than two rows is dropped. Parameters are kept
/// at `f32` precision after every step so checkpoints are lossless.
pub fn train(model: SkDaeModel, data: &ContextWindowBatch, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if data.feature_dim() != model.dims().feature_dim || data.inputs.ncols() != model.dims().input_dim() {
        return Err(Error::Dimension(format!(
            "data has {}-wide inputs / {}-dim targets, model expects {} / {}",
            data.inputs.ncols(),
            data.feature_dim(),
            model.dims().input_dim(),
            model.dims().feature_dim
        )));
    }

    let mut model = model;
    for layer in model.layers_mut() {
        layer.round_to_f32();
    }
    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut reports = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, "shuffle", epoch as u64));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut mse_sum = 0.0;
        let mut rows = 0usize;
        let mut dcor_latent_sum = 0.0;
        let mut dcor_output_sum = 0.0;
        let mut batches = 0usize;

        for (b_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                debug!("epoch {}: dropping trailing batch of {} row(s)", epoch + 1, chunk.len());
                continue;
            }
            let batch = data.select(chunk);
            let mut tape = Tape::new();
            let fwd = model.forward_on_tape(&mut tape, &batch.inputs, &batch.center_frames)?;
            let obj = objective_on_tape(&mut tape, fwd.output, fwd.latent, &batch.targets, cfg.beta, cfg.sigma)?;
            let loss = tape.scalar(obj.loss);
            let (dl, dout) = match obj.terms {
                Some(t) => (t.latent, t.output),
                None => (
                    batch_dcor(tape.value(fwd.latent), &batch.targets)?,
                    batch_dcor(tape.value(fwd.output), &batch.targets)?,
                ),
            };
            if !loss.is_finite() || !obj.mse.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: b_idx,
                    loss,
                    mse: obj.mse,
                    dcor_latent: obj.terms.map(|t| t.latent),
                    dcor_output: obj.terms.map(|t| t.output),
                });
            }

            let grads = tape.backward(obj.loss)?;
            let mut grad_store: Vec<Array2<f64>> = Vec::with_capacity(14);
            for (vars, layer) in fwd.params.iter().zip(model.layers()) {
                grad_store.push(grads.get_or_zeros(vars.weight, &layer.weight).as_standard_layout().into_owned());
                grad_store.push(grads.get_or_zeros(vars.bias, &layer.bias).as_standard_layout().into_owned());
            }
            let grad_slices: Vec<&[f64]> = grad_store
                .iter()
                .map(|g| g.as_slice().expect("standard layout"))
                .collect();
            let mut param_slices: Vec<&mut [f64]> = model
                .layers_mut()
                .iter_mut()
                .flat_map(|l| {
                    [
                        l.weight.as_slice_mut().expect("standard layout"),
                        l.bias.as_slice_mut().expect("standard layout"),
                    ]
                })
                .collect();
            adam.step(&mut param_slices, &grad_slices).map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::Diverged {
                    epoch: epoch + 1,
                    batch: b_idx,
                    loss,
                    mse: obj.mse,
                    dcor_latent: Some(dl),
                    dcor_output: Some(dout),
                },
                other => other,
            })?;
            for layer in model.layers_mut() {
                layer.round_to_f32();
            }

            let n = chunk.len();
            loss_sum += loss * n as f64;
            mse_sum += obj.mse * n as f64;
            rows += n;
            dcor_latent_sum += dl;
            dcor_output_sum += dout;
            batches += 1;
        }

        if batches == 0 {
            return Err(Error::InvalidInput("no batch with at least 2 rows".into()));
        }
        let report = EpochReport {
            epoch: epoch + 1,
            loss: loss_sum / rows as f64,
            mse: mse_sum / rows as f64,
            dcor_latent: dcor_latent_sum / batches as f64,
            dcor_output: dcor_output_sum / batches as f64,
        };
        info!(
            "epoch {:>3}  loss {:.6}  mse {:.6}  dcor(z,x) {:.4}  dcor(x̂,x) {:.4}",
            report.epoch, report.loss, report.mse, report.dcor_latent, report.dcor_output
        );
        reports.push(report);
    }
    Ok(TrainOutcome { model, reports })
}
