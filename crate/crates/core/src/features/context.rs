use ndarray::{s, Array2, Axis};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Frames on each side of the target frame (11-frame windows).
pub const CONTEXT_RADIUS: usize = 5;

/// Stacked noisy context windows with their center frames and clean targets.
///
/// Row i of `inputs` is `[x̃_{t-r}, …, x̃_t, …, x̃_{t+r}]`, so the center frame
/// occupies columns `r·D .. (r+1)·D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindowBatch {
    pub inputs: Array2<f64>,
    pub center_frames: Array2<f64>,
    pub targets: Array2<f64>,
}

impl ContextWindowBatch {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn context_frames(&self) -> usize {
        self.inputs.ncols() / self.feature_dim().max(1)
    }

    fn check(&self) -> Result<()> {
        let n = self.inputs.nrows();
        let d = self.targets.ncols();
        if self.center_frames.nrows() != n || self.targets.nrows() != n {
            return Err(Error::Dimension("batch parts disagree on row count".into()));
        }
        if self.center_frames.ncols() != d || d == 0 || !self.inputs.ncols().is_multiple_of(d) {
            return Err(Error::Dimension(format!(
                "inputs {} / center {} / targets {} columns are inconsistent",
                self.inputs.ncols(),
                self.center_frames.ncols(),
                d
            )));
        }
        if (self.inputs.ncols() / d) % 2 != 1 {
            return Err(Error::Dimension("context window must have an odd frame count".into()));
        }
        Ok(())
    }

    /// Validates shapes and builds a batch from parts.
    pub fn new(inputs: Array2<f64>, center_frames: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        let b = Self {
            inputs,
            center_frames,
            targets,
        };
        b.check()?;
        Ok(b)
    }

    /// Rows in the given order.
    pub fn select(&self, rows: &[usize]) -> ContextWindowBatch {
        ContextWindowBatch {
            inputs: self.inputs.select(Axis(0), rows),
            center_frames: self.center_frames.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
        }
    }

    /// Concatenates batches row-wise.
    pub fn concat(parts: &[ContextWindowBatch]) -> Result<ContextWindowBatch> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("no batches to concatenate".into()))?;
        let cat = |f: fn(&ContextWindowBatch) -> &Array2<f64>| -> Result<Array2<f64>> {
            let views: Vec<_> = parts.iter().map(|p| f(p).view()).collect();
            ndarray::concatenate(Axis(0), &views)
                .map_err(|e| Error::Dimension(format!("cannot concatenate batches: {e}")))
        };
        let out = ContextWindowBatch {
            inputs: cat(|p| &p.inputs)?,
            center_frames: cat(|p| &p.center_frames)?,
            targets: cat(|p| &p.targets)?,
        };
        debug_assert_eq!(out.feature_dim(), first.feature_dim());
        out.check()?;
        Ok(out)
    }
}

/// Builds one 11-frame window per frame; neighbors past either end repeat the edge frame.
pub fn stack_context(noisy: &FeatureMatrix, clean: &FeatureMatrix) -> Result<ContextWindowBatch> {
    stack_context_with_radius(noisy, clean, CONTEXT_RADIUS)
}

pub fn stack_context_with_radius(
    noisy: &FeatureMatrix,
    clean: &FeatureMatrix,
    radius: usize,
) -> Result<ContextWindowBatch> {
    if !noisy.is_normalized() || !clean.is_normalized() {
        return Err(Error::Contract("context stacking needs normalized features".into()));
    }
    if noisy.num_frames() != clean.num_frames() || noisy.dim() != clean.dim() {
        return Err(Error::Dimension(format!(
            "noisy {}x{} vs clean {}x{}",
            noisy.num_frames(),
            noisy.dim(),
            clean.num_frames(),
            clean.dim()
        )));
    }
    let t_len = noisy.num_frames();
    let d = noisy.dim();
    let width = 2 * radius + 1;
    let src = noisy.frames();
    let mut inputs = Array2::<f64>::zeros((t_len, width * d));
    for t in 0..t_len {
        for slot in 0..width {
            let idx = (t + slot).saturating_sub(radius).min(t_len - 1);
            inputs
                .slice_mut(s![t, slot * d..(slot + 1) * d])
                .assign(&src.row(idx));
        }
    }
    Ok(ContextWindowBatch {
        inputs,
        center_frames: src.clone(),
        targets: clean.frames().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Normalization;
    use proptest::prelude::*;

    fn normalized(frames: Array2<f64>) -> FeatureMatrix {
        let d = frames.ncols();
        FeatureMatrix::normalized(
            frames,
            Normalization {
                min: vec![0.0; d],
                max: vec![1.0; d],
            },
        )
        .unwrap()
    }

    fn ramp(t: usize, d: usize) -> FeatureMatrix {
        normalized(Array2::from_shape_fn((t, d), |(i, j)| {
            (i * d + j) as f64 / (t * d) as f64
        }))
    }

    #[test]
    fn single_frame_repeats() {
        let f = ramp(1, 40);
        let b = stack_context(&f, &f).unwrap();
        assert_eq!(b.inputs.dim(), (1, 440));
        for slot in 0..11 {
            assert_eq!(b.inputs.slice(s![0, slot * 40..(slot + 1) * 40]), f.frames().row(0));
        }
    }

    #[test]
    fn interior_window_is_verbatim() {
        let f = ramp(12, 40);
        let b = stack_context(&f, &f).unwrap();
        for slot in 0..11 {
            assert_eq!(
                b.inputs.slice(s![6, slot * 40..(slot + 1) * 40]),
                f.frames().row(slot + 1)
            );
        }
        assert_eq!(b.inputs.slice(s![6, 200..240]), f.frames().row(6));
    }

    #[test]
    fn errors() {
        let a = ramp(5, 40);
        let b = ramp(6, 40);
        assert!(matches!(stack_context(&a, &b), Err(Error::Dimension(_))));
        let raw = FeatureMatrix::raw(Array2::zeros((5, 40))).unwrap();
        assert!(matches!(stack_context(&raw, &a), Err(Error::Contract(_))));
    }

    proptest! {
        #[test]
        fn center_slot_and_range(t in 1usize..40, seed in 0u64..1000) {
            let f = normalized(Array2::from_shape_fn((t, 40), |(i, j)| {
                ((i as u64 * 31 + j as u64 * 7 + seed) % 101) as f64 / 100.0
            }));
            let b = stack_context(&f, &f).unwrap();
            prop_assert_eq!(b.len(), t);
            prop_assert_eq!(b.inputs.slice(s![.., 200..240]), b.center_frames.view());
            prop_assert!(b.inputs.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
