//! Seeded toy corpora: harmonic "speech" with syllable envelopes and
//! spectrally colored noise. Used by smoke runs where licensed speech
//! corpora are unavailable.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::{mix_at_snr, stack_context_with_radius, ContextWindowBatch, LogMelExtractor, Mixture, Utterance};
use crate::seed;

pub const SAMPLE_RATE: u32 = 16_000;

/// Colors of synthetic background noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// One-pole low-passed white noise.
    Rumble,
    /// Two-pole resonance near 1.2 kHz.
    Band,
    /// First-difference (high-passed) white noise.
    Hiss,
    /// Mains-like hum with harmonics plus a little white noise.
    Hum,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::Rumble, NoiseKind::Band, NoiseKind::Hiss, NoiseKind::Hum];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Rumble => "rumble",
            NoiseKind::Band => "band",
            NoiseKind::Hiss => "hiss",
            NoiseKind::Hum => "hum",
        }
    }
}

/// Voiced harmonic bursts separated by short pauses.
pub fn speech(len: usize, seed: u64) -> Utterance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = SAMPLE_RATE as f64;
    let mut out = vec![0.0; len];
    let mut pos = rng.gen_range(0..len / 10 + 1);
    while pos < len {
        let syl = rng.gen_range(1600..4800).min(len - pos);
        let f0_start: f64 = rng.gen_range(100.0..240.0);
        let f0_end = f0_start * rng.gen_range(0.8..1.25);
        // Formant-like emphasis on a couple of harmonic regions.
        let formants = [rng.gen_range(300.0..900.0), rng.gen_range(1000.0..2500.0)];
        let n_harm = (3800.0 / f0_start.max(f0_end)) as usize;
        let gains: Vec<f64> = (1..=n_harm)
            .map(|k| {
                let f = k as f64 * f0_start;
                let emph: f64 = formants
                    .iter()
                    .map(|fc| (-((f - fc) / 250.0).powi(2)).exp())
                    .sum();
                (0.15 + emph) / k as f64
            })
            .collect();
        let phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let mut phase_acc = 0.0;
        for i in 0..syl {
            let frac = i as f64 / syl as f64;
            let f0 = f0_start + (f0_end - f0_start) * frac;
            phase_acc += 2.0 * PI * f0 / sr;
            let env = 0.5 - 0.5 * (2.0 * PI * frac).cos();
            let mut v = 0.0;
            for (k, (g, p)) in gains.iter().zip(&phases).enumerate() {
                v += g * ((k + 1) as f64 * phase_acc + p).sin();
            }
            out[pos + i] += 0.25 * env * v;
        }
        pos += syl + rng.gen_range(400..2400);
    }
    Utterance::new(out, SAMPLE_RATE).expect("finite samples")
}

pub fn noise(kind: NoiseKind, len: usize, seed: u64) -> Utterance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut white = || rng.gen_range(-1.0..1.0);
    let mut out = Vec::with_capacity(len);
    match kind {
        NoiseKind::Rumble => {
            let mut y = 0.0;
            for _ in 0..len {
                y = 0.95 * y + 0.05 * white();
                out.push(y);
            }
        }
        NoiseKind::Band => {
            let (r, theta) = (0.97, 2.0 * PI * 1200.0 / SAMPLE_RATE as f64);
            let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
            let (mut y1, mut y2) = (0.0, 0.0);
            for _ in 0..len {
                let y = white() * 0.05 + a1 * y1 + a2 * y2;
                y2 = y1;
                y1 = y;
                out.push(y);
            }
        }
        NoiseKind::Hiss => {
            let mut prev = 0.0;
            for _ in 0..len {
                let w = white();
                out.push(w - prev);
                prev = w;
            }
        }
        NoiseKind::Hum => {
            for i in 0..len {
                let t = i as f64 / SAMPLE_RATE as f64;
                let hum: f64 = (1..=6)
                    .map(|k| (2.0 * PI * 60.0 * k as f64 * t).sin() / k as f64)
                    .sum();
                out.push(hum + 0.1 * white());
            }
        }
    }
    Utterance::new(out, SAMPLE_RATE).expect("finite samples")
}

/// One clean utterance mixed with one noise at one SNR.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub clean: Utterance,
    pub mixture: Mixture,
    pub noise: NoiseKind,
    pub snr_db: f64,
}

/// `count` utterances cycling through noise kinds and the given SNRs.
pub fn corpus(count: usize, samples_per_utterance: usize, snrs_db: &[f64], seed: u64) -> Result<Vec<SyntheticPair>> {
    let noise_len = samples_per_utterance * 3;
    let noises: Vec<Utterance> = NoiseKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &k)| noise(k, noise_len, seed::derive(seed, "noise", i as u64)))
        .collect();
    (0..count)
        .map(|i| {
            let kind_idx = i % NoiseKind::ALL.len();
            let snr_db = snrs_db[(i / NoiseKind::ALL.len()) % snrs_db.len()];
            let clean = speech(samples_per_utterance, seed::derive(seed, "speech", i as u64));
            let mixture = mix_at_snr(&clean, &noises[kind_idx], snr_db, seed::derive(seed, "mix", i as u64))?;
            Ok(SyntheticPair {
                clean,
                mixture,
                noise: NoiseKind::ALL[kind_idx],
                snr_db,
            })
        })
        .collect()
}

/// Normalized context windows for every frame of every pair.
pub fn context_windows(pairs: &[SyntheticPair], extractor: &LogMelExtractor, radius: usize) -> Result<ContextWindowBatch> {
    let parts = pairs
        .iter()
        .map(|p| {
            let clean = extractor.extract(&p.clean)?.normalize()?;
            let noisy = extractor.extract(&p.mixture.mixed)?.normalize()?;
            stack_context_with_radius(&noisy, &clean, radius)
        })
        .collect::<Result<Vec<_>>>()?;
    ContextWindowBatch::concat(&parts)
}
