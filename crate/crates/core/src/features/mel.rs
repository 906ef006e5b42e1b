use ndarray::Array2;

use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with unit peak, edges equally spaced on the mel scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Array2<f64>,
    /// `n_mels + 2` band edges in Hz; filter m spans edges m..=m+2.
    edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Result<Self> {
        let nyquist = sample_rate as f64 / 2.0;
        if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
            return Err(Error::InvalidInput(format!(
                "filterbank range {f_min}..{f_max} Hz invalid for {sample_rate} Hz audio"
            )));
        }
        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let n_bins = fft_size / 2 + 1;
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let weights = Array2::from_shape_fn((n_mels, n_bins), |(m, k)| {
            let f = k as f64 * bin_hz;
            let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            if f <= left || f >= right {
                0.0
            } else if f <= center {
                (f - left) / (center - left)
            } else {
                (right - f) / (right - center)
            }
        });
        Ok(Self { weights, edges_hz })
    }

    /// n_mels × (fft_size/2 + 1) weight matrix.
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.edges_hz[m + 1]
    }

    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 440.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.985_6).abs() < 1e-3);
    }

    #[test]
    fn filters_cover_the_band() {
        let fb = MelFilterbank::new(40, 512, 16_000, 0.0, 8000.0).unwrap();
        assert_eq!(fb.weights().dim(), (40, 257));
        assert!(fb.weights().iter().all(|w| (0.0..=1.0).contains(w)));
        for m in 0..40 {
            assert!(fb.weights().row(m).iter().any(|&w| w > 0.0), "filter {m} empty");
        }
        assert!((fb.edges_hz()[41] - 8000.0).abs() < 1e-6);
    }

    #[test]
    fn bad_range() {
        assert!(MelFilterbank::new(40, 512, 16_000, 0.0, 9000.0).is_err());
    }
}
