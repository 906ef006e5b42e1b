use ndarray::{concatenate, Array2, Axis};

use crate::error::{Error, Result};
use crate::features::{ContextWindowBatch, N_MELS};
use crate::nn::{DenseLayer, LayerVars, Tape, Var};
use crate::seed;

/// Layer widths of the skip-connection autoencoder.
///
/// The encoder maps the stacked context to `encoder[2]` latent units; the
/// raw center frame is concatenated onto the outputs of the first encoder
/// layer and the first decoder layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub feature_dim: usize,
    pub context_frames: usize,
    pub encoder: [usize; 3],
    pub decoder: [usize; 3],
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            feature_dim: N_MELS,
            context_frames: 11,
            encoder: [512, 256, 128],
            decoder: [128, 256, 512],
        }
    }
}

impl ModelDims {
    /// Encoder widths `[a, b, c]` with the decoder mirroring them as `[c, b, a]`.
    pub fn mirrored(feature_dim: usize, context_frames: usize, encoder: [usize; 3]) -> Self {
        Self {
            feature_dim,
            context_frames,
            encoder,
            decoder: [encoder[2], encoder[1], encoder[0]],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim * self.context_frames
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[2]
    }

    /// (fan_in, fan_out) of the seven layers in forward order.
    pub fn layer_shapes(&self) -> [(usize, usize); 7] {
        let d = self.feature_dim;
        let [e1, e2, e3] = self.encoder;
        let [d1, d2, d3] = self.decoder;
        [
            (self.input_dim(), e1),
            (e1 + d, e2),
            (e2, e3),
            (e3, d1),
            (d1 + d, d2),
            (d2, d3),
            (d3, d),
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.context_frames % 2 != 1 {
            return Err(Error::InvalidInput(format!(
                "feature dim {} / context {} invalid (context must be odd)",
                self.feature_dim, self.context_frames
            )));
        }
        if self.encoder.iter().chain(&self.decoder).any(|&w| w == 0) {
            return Err(Error::InvalidInput("layer widths must be positive".into()));
        }
        Ok(())
    }
}

pub const LAYER_NAMES: [&str; 7] = ["enc1", "enc2", "enc3", "dec1", "dec2", "dec3", "out"];

/// Seven sigmoid layers: three encoder, three decoder and the 40-unit output.
#[derive(Debug, Clone, PartialEq)]
pub struct SkDaeModel {
    dims: ModelDims,
    layers: Vec<DenseLayer>,
}

/// Latent code and reconstruction for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub latent: Array2<f64>,
    pub output: Array2<f64>,
}

/// Tape handles produced by [`SkDaeModel::forward_on_tape`].
#[derive(Debug, Clone)]
pub struct TapeForward {
    pub params: Vec<LayerVars>,
    pub latent: Var,
    pub output: Var,
}

impl SkDaeModel {
    /// Xavier-initialized model; each layer draws from its own derived seed.
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let layers = dims
            .layer_shapes()
            .iter()
            .enumerate()
            .map(|(i, &(fan_in, fan_out))| {
                DenseLayer::xavier(fan_in, fan_out, seed::derive(seed, "layer", i as u64))
            })
            .collect();
        Ok(Self { dims, layers })
    }

    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let layers = dims
            .layer_shapes()
            .iter()
            .map(|&(i, o)| DenseLayer::zeros(i, o))
            .collect();
        Ok(Self { dims, layers })
    }

    /// Assembles a model from explicit layers, checking the dimension chain.
    pub fn from_layers(dims: ModelDims, layers: Vec<DenseLayer>) -> Result<Self> {
        dims.validate()?;
        let shapes = dims.layer_shapes();
        if layers.len() != shapes.len() {
            return Err(Error::Dimension(format!("expected 7 layers, got {}", layers.len())));
        }
        for (i, (layer, &(fan_in, fan_out))) in layers.iter().zip(&shapes).enumerate() {
            if layer.fan_in() != fan_in || layer.fan_out() != fan_out {
                return Err(Error::Dimension(format!(
                    "{} is {}x{}, expected {}x{}",
                    LAYER_NAMES[i],
                    layer.fan_out(),
                    layer.fan_in(),
                    fan_out,
                    fan_in
                )));
            }
        }
        Ok(Self { dims, layers })
    }

    /// Infers dimensions from the layer shapes alone.
    pub fn infer_from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.len() != 7 {
            return Err(Error::Dimension(format!("expected 7 layers, got {}", layers.len())));
        }
        let feature_dim = layers[6].fan_out();
        let input = layers[0].fan_in();
        if feature_dim == 0 || !input.is_multiple_of(feature_dim) {
            return Err(Error::Dimension(format!(
                "input width {input} is not a multiple of feature dim {feature_dim}"
            )));
        }
        let dims = ModelDims {
            feature_dim,
            context_frames: input / feature_dim,
            encoder: [layers[0].fan_out(), layers[1].fan_out(), layers[2].fan_out()],
            decoder: [layers[3].fan_out(), layers[4].fan_out(), layers[5].fan_out()],
        };
        Self::from_layers(dims, layers)
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    fn check_batch(&self, inputs: &Array2<f64>, center: &Array2<f64>) -> Result<()> {
        if inputs.ncols() != self.dims.input_dim() || center.ncols() != self.dims.feature_dim {
            return Err(Error::Dimension(format!(
                "model expects {}-wide inputs and {}-wide center frames, got {} and {}",
                self.dims.input_dim(),
                self.dims.feature_dim,
                inputs.ncols(),
                center.ncols()
            )));
        }
        if inputs.nrows() != center.nrows() {
            return Err(Error::Dimension("inputs and center frames differ in rows".into()));
        }
        Ok(())
    }

    /// Tape-free forward pass.
    pub fn forward(&self, batch: &ContextWindowBatch) -> Result<ForwardOutput> {
        self.forward_parts(&batch.inputs, &batch.center_frames)
    }

    pub fn forward_parts(&self, inputs: &Array2<f64>, center: &Array2<f64>) -> Result<ForwardOutput> {
        self.check_batch(inputs, center)?;
        let l = &self.layers;
        let h1 = l[0].apply_sigmoid(inputs)?;
        let h2 = l[1].apply_sigmoid(&concatenate(Axis(1), &[h1.view(), center.view()]).expect("rows"))?;
        let latent = l[2].apply_sigmoid(&h2)?;
        let g1 = l[3].apply_sigmoid(&latent)?;
        let g2 = l[4].apply_sigmoid(&concatenate(Axis(1), &[g1.view(), center.view()]).expect("rows"))?;
        let g3 = l[5].apply_sigmoid(&g2)?;
        let output = l[6].apply_sigmoid(&g3)?;
        Ok(ForwardOutput { latent, output })
    }

    /// Forward pass recorded on `tape`, registering all parameters.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        inputs: &Array2<f64>,
        center: &Array2<f64>,
    ) -> Result<TapeForward> {
        self.check_batch(inputs, center)?;
        let params: Vec<LayerVars> = self.layers.iter().map(|l| l.register(tape)).collect();
        let x = tape.constant(inputs.clone());
        let skip = tape.constant(center.clone());
        let h1 = DenseLayer::forward_sigmoid(tape, params[0], x)?;
        let c1 = tape.concat_cols(h1, skip)?;
        let h2 = DenseLayer::forward_sigmoid(tape, params[1], c1)?;
        let latent = DenseLayer::forward_sigmoid(tape, params[2], h2)?;
        let g1 = DenseLayer::forward_sigmoid(tape, params[3], latent)?;
        let c2 = tape.concat_cols(g1, skip)?;
        let g2 = DenseLayer::forward_sigmoid(tape, params[4], c2)?;
        let g3 = DenseLayer::forward_sigmoid(tape, params[5], g2)?;
        let output = DenseLayer::forward_sigmoid(tape, params[6], g3)?;
        Ok(TapeForward {
            params,
            latent,
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::s;

    fn small_dims() -> ModelDims {
        ModelDims::mirrored(5, 3, [8, 6, 4])
    }

    fn batch(n: usize, dims: &ModelDims, salt: f64) -> ContextWindowBatch {
        let d = dims.feature_dim;
        let inputs = Array2::from_shape_fn((n, dims.input_dim()), |(i, j)| {
            (0.5 + 0.5 * ((i * 13 + j * 7) as f64 * 0.1 + salt).sin()).clamp(0.0, 1.0)
        });
        let r = dims.context_frames / 2;
        let center = inputs.slice(s![.., r * d..(r + 1) * d]).to_owned();
        ContextWindowBatch::new(inputs, center.clone(), center).unwrap()
    }

    #[test]
    fn full_size_shapes() {
        let dims = ModelDims::default();
        assert_eq!(
            dims.layer_shapes(),
            [(440, 512), (552, 256), (256, 128), (128, 128), (168, 256), (256, 512), (512, 40)]
        );
        let m = SkDaeModel::new(dims, 1).unwrap();
        for n in [1, 3, 17] {
            let out = m.forward(&batch(n, &dims, 0.0)).unwrap();
            assert_eq!(out.latent.dim(), (n, 128));
            assert_eq!(out.output.dim(), (n, 40));
            assert!(out.output.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn zero_model_is_constant() {
        let dims = small_dims();
        let m = SkDaeModel::zeros(dims).unwrap();
        let out = m.forward(&batch(6, &dims, 0.3)).unwrap();
        let first = out.output.row(0).to_owned();
        for row in out.output.rows() {
            assert_eq!(row, first);
        }
    }

    #[test]
    fn tape_forward_matches_plain() {
        let dims = small_dims();
        let m = SkDaeModel::new(dims, 4).unwrap();
        let b = batch(6, &dims, 1.0);
        let plain = m.forward(&b).unwrap();
        let mut tape = Tape::new();
        let tf = m.forward_on_tape(&mut tape, &b.inputs, &b.center_frames).unwrap();
        assert_eq!(tape.value(tf.latent), &plain.latent);
        assert_eq!(tape.value(tf.output), &plain.output);
    }

    #[test]
    fn skip_path_is_live() {
        // Only the skip input changes; the stacked context is held fixed.
        let dims = small_dims();
        let m = SkDaeModel::new(dims, 2).unwrap();
        let b = batch(4, &dims, 0.5);
        let h = 1e-6;
        let mut plus = b.center_frames.clone();
        plus[[0, 2]] += h;
        let mut minus = b.center_frames.clone();
        minus[[0, 2]] -= h;
        let op = m.forward_parts(&b.inputs, &plus).unwrap().output;
        let om = m.forward_parts(&b.inputs, &minus).unwrap().output;
        let jac: Vec<f64> = op.row(0).iter().zip(om.row(0)).map(|(a, c)| (a - c) / (2.0 * h)).collect();
        assert!(jac.iter().any(|v| v.abs() > 1e-6), "{jac:?}");
    }

    #[test]
    fn shape_errors() {
        let dims = small_dims();
        let m = SkDaeModel::new(dims, 2).unwrap();
        let wide = batch(3, &ModelDims::mirrored(5, 5, [8, 6, 4]), 0.0);
        assert!(matches!(m.forward(&wide), Err(Error::Dimension(_))));
        let mut layers = m.layers().to_vec();
        layers.swap(0, 1);
        assert!(SkDaeModel::from_layers(dims, layers).is_err());
        let inferred = SkDaeModel::infer_from_layers(m.layers().to_vec()).unwrap();
        assert_eq!(inferred.dims(), &dims);
    }
}
