use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Utterance;
use crate::error::{Error, Result};

/// A mixed utterance together with the components that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixed: Utterance,
    /// Start index into the noise file; the segment wraps around when the noise is short.
    pub noise_offset: usize,
    pub gain: f64,
    pub scaled_noise: Vec<f64>,
}

pub fn mean_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
}

pub fn measured_snr_db(speech: &[f64], noise: &[f64]) -> f64 {
    10.0 * (mean_power(speech) / mean_power(noise)).log10()
}

/// Adds a seeded segment of `noise` to `speech`, scaled so the speech-to-noise
/// power ratio over the utterance is exactly `snr_db`.
pub fn mix_at_snr(speech: &Utterance, noise: &Utterance, snr_db: f64, seed: u64) -> Result<Mixture> {
    if speech.sample_rate != noise.sample_rate {
        return Err(Error::UnsupportedAudio(format!(
            "speech at {} Hz but noise at {} Hz",
            speech.sample_rate, noise.sample_rate
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("SNR must be finite, got {snr_db}")));
    }
    if speech.is_empty() || noise.is_empty() {
        return Err(Error::DegenerateSignal("empty speech or noise".into()));
    }
    let len = speech.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_offset = if noise.len() >= len {
        rng.gen_range(0..=noise.len() - len)
    } else {
        rng.gen_range(0..noise.len())
    };
    let segment: Vec<f64> = (0..len)
        .map(|i| noise.samples[(noise_offset + i) % noise.len()])
        .collect();

    let speech_power = mean_power(&speech.samples);
    let noise_power = mean_power(&segment);
    if speech_power <= 0.0 {
        return Err(Error::DegenerateSignal("speech has zero power".into()));
    }
    if noise_power <= 0.0 {
        return Err(Error::DegenerateSignal("noise segment has zero power".into()));
    }
    let gain = (speech_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled_noise: Vec<f64> = segment.iter().map(|n| n * gain).collect();
    let mixed = speech
        .samples
        .iter()
        .zip(&scaled_noise)
        .map(|(s, n)| s + n)
        .collect();
    Ok(Mixture {
        mixed: Utterance::new(mixed, speech.sample_rate)?,
        noise_offset,
        gain,
        scaled_noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(len: usize, seed: u64, amp: f64) -> Utterance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Utterance::new((0..len).map(|_| amp * rng.gen_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    #[test]
    fn zero_db_matches_powers() {
        let s = signal(4000, 1, 0.3);
        let n = signal(9000, 2, 0.9);
        let m = mix_at_snr(&s, &n, 0.0, 7).unwrap();
        let ps = mean_power(&s.samples);
        let pn = mean_power(&m.scaled_noise);
        assert!(((pn - ps) / ps).abs() < 1e-9);
    }

    #[test]
    fn twenty_db_is_one_hundredth() {
        let s = signal(4000, 3, 0.3);
        let n = signal(9000, 4, 0.9);
        let m = mix_at_snr(&s, &n, 20.0, 7).unwrap();
        let ps = mean_power(&s.samples);
        let pn = mean_power(&m.scaled_noise);
        assert!(((pn - ps / 100.0) / (ps / 100.0)).abs() < 1e-9);
    }

    #[test]
    fn measured_snr_and_determinism() {
        let s = signal(3000, 5, 0.2);
        let n = signal(1000, 6, 0.5); // shorter than speech: tiled
        for snr in [0.0, 5.0, 10.0, 20.0] {
            let a = mix_at_snr(&s, &n, snr, 11).unwrap();
            let b = mix_at_snr(&s, &n, snr, 11).unwrap();
            assert_eq!(a, b);
            assert!((measured_snr_db(&s.samples, &a.scaled_noise) - snr).abs() < 1e-6);
            for (i, (mix, sp)) in a.mixed.samples.iter().zip(&s.samples).enumerate() {
                let raw = n.samples[(a.noise_offset + i) % n.len()];
                assert!((mix - sp - a.gain * raw).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let s = signal(1000, 1, 0.2);
        let silent = Utterance::new(vec![0.0; 2000], 16_000).unwrap();
        assert!(matches!(mix_at_snr(&silent, &s, 0.0, 1), Err(Error::DegenerateSignal(_))));
        assert!(matches!(mix_at_snr(&s, &silent, 0.0, 1), Err(Error::DegenerateSignal(_))));
        let other = Utterance::new(vec![0.1; 2000], 8000).unwrap();
        assert!(matches!(mix_at_snr(&s, &other, 0.0, 1), Err(Error::UnsupportedAudio(_))));
    }
}
