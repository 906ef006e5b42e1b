use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment buffers.
///
/// Buffers are allocated on the first step and must keep the same layout afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dimension(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::Dimension(format!(
                    "parameter {i} has {} entries, gradient {}",
                    p.len(),
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { param: i });
            }
        }
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != grads.len()
            || self.first.iter().zip(grads).any(|(m, g)| m.len() != g.len())
        {
            return Err(Error::Dimension("parameter layout changed between steps".into()));
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = AdamState::new(AdamConfig::default());
        let mut p = vec![0.3, -1.2];
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[&[0.0, 0.0]]).unwrap();
        }
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn constant_gradient_steps_by_lr() {
        // m̂ = g and v̂ = g² exactly for a constant gradient, so each step is lr·g/(|g|+ε).
        let cfg = AdamConfig::default();
        let mut adam = AdamState::new(cfg);
        let g = 0.37;
        let mut p = vec![1.0];
        let expected = cfg.lr * g / (g + cfg.eps);
        for _ in 0..200 {
            let before = p[0];
            adam.step(&mut [&mut p], &[&[g]]).unwrap();
            let delta = before - p[0];
            assert!(((delta - expected) / expected).abs() < 1e-6, "{delta}");
        }
        assert_eq!(adam.steps(), 200);
    }

    #[test]
    fn deterministic_and_rejects_nan() {
        let run = || {
            let mut adam = AdamState::new(AdamConfig::default());
            let mut p = vec![0.5, 0.25, -0.75];
            for k in 0..10 {
                let g: Vec<f64> = p.iter().map(|x| x * (k as f64 + 1.0).sin()).collect();
                adam.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
        let mut adam = AdamState::new(AdamConfig::default());
        let mut p = vec![1.0];
        assert!(matches!(
            adam.step(&mut [&mut p], &[&[f64::NAN]]),
            Err(Error::NonFiniteGradient { param: 0 })
        ));
        assert_eq!(p, vec![1.0]);
    }
}
