use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{affine, sigmoid_matrix, Tape, Var};
use crate::error::{Error, Result};

/// Fully connected layer `y = σ(x·Wᵀ + b)` with W stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    /// 1×out row, broadcast over the batch.
    pub bias: Array2<f64>,
}

/// Tape handles for one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub weight: Var,
    pub bias: Var,
}

impl DenseLayer {
    pub fn new(weight: Array2<f64>, bias: Array2<f64>) -> Result<Self> {
        if bias.nrows() != 1 || bias.ncols() != weight.nrows() {
            return Err(Error::Dimension(format!(
                "bias {:?} does not match weight {:?}",
                bias.dim(),
                weight.dim()
            )));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite layer parameter".into()));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array2::zeros((1, fan_out)),
        }
    }

    /// Xavier/Glorot uniform weights on (−a, a), a = sqrt(6 / (fan_in + fan_out)), zero bias.
    ///
    /// Draws are rounded to `f32` so parameters survive a 32-bit checkpoint unchanged.
    pub fn xavier(fan_in: usize, fan_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
            let v = rng.gen_range(-a..a) as f32;
            // f32 rounding could land exactly on the bound
            (if (v as f64).abs() >= a { 0.0 } else { v }) as f64
        });
        Self {
            weight,
            bias: Array2::zeros((1, fan_out)),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }

    pub fn register(&self, tape: &mut Tape) -> LayerVars {
        LayerVars {
            weight: tape.param(self.weight.clone()),
            bias: tape.param(self.bias.clone()),
        }
    }

    /// Sigmoid activation recorded on the tape.
    pub fn forward_sigmoid(tape: &mut Tape, vars: LayerVars, x: Var) -> Result<Var> {
        let z = tape.affine(x, vars.weight, vars.bias)?;
        Ok(tape.sigmoid(z))
    }

    /// Tape-free forward, bitwise identical to [`forward_sigmoid`](Self::forward_sigmoid).
    pub fn apply_sigmoid(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.fan_in() {
            return Err(Error::Dimension(format!(
                "layer expects {} inputs, got {}",
                self.fan_in(),
                x.ncols()
            )));
        }
        Ok(sigmoid_matrix(&affine(x, &self.weight, &self.bias)))
    }

    pub fn round_to_f32(&mut self) {
        self.weight.mapv_inplace(|v| v as f32 as f64);
        self.bias.mapv_inplace(|v| v as f32 as f64);
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
