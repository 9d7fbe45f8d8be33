//! Block-fading complex AWGN channel, `y_b = h_b x_b + v_b`.
//!
//! Randomness is counter based: every trial derives independent ChaCha8
//! streams from `(seed, trial, stream)`, so a trial's draws do not depend on
//! which thread runs it or in what order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use crate::error::{invalid, Result};

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Message = 0,
    Channel = 1,
    Noise = 2,
    /// Synthetic impairments injected by tests.
    Aux = 3,
}

/// RNG for one `(seed, trial, stream)` triple.
pub fn trial_rng(seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(4).wrapping_add(stream as u64));
    rng
}

/// Converts SNR in dB to the noise variance `sigma^2 = 1 / SNR`.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingModel {
    /// `|h_b| = 1` with phase uniform on `[0, 2 pi)`.
    #[default]
    UnitPhase,
    /// `h_b ~ CN(0, 1)`.
    Rayleigh,
}

/// One packet's channel: per-block gains, block sizes and noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    pub coefficients: Vec<Complex64>,
    pub block_lengths: Vec<usize>,
    /// Total complex noise variance; SNR = 1 / sigma2.
    pub sigma2: f64,
}

impl FadingRealization {
    pub fn new(coefficients: Vec<Complex64>, block_lengths: Vec<usize>, sigma2: f64) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() != block_lengths.len() {
            return invalid("need one coefficient per block and at least one block");
        }
        if sigma2.is_nan() || sigma2 < 0.0 {
            return invalid(format!("noise variance {sigma2} must be non-negative"));
        }
        Ok(Self {
            coefficients,
            block_lengths,
            sigma2,
        })
    }

    pub fn blocks(&self) -> usize {
        self.coefficients.len()
    }

    pub fn packet_length(&self) -> usize {
        self.block_lengths.iter().sum()
    }
}

/// Draws one gain per block.
pub fn sample_channel(
    block_lengths: &[usize],
    sigma2: f64,
    model: FadingModel,
    rng: &mut impl Rng,
) -> Result<FadingRealization> {
    let coefficients = (0..block_lengths.len())
        .map(|_| match model {
            FadingModel::UnitPhase => Complex64::from_polar(1.0, rng.random_range(0.0..TAU)),
            FadingModel::Rayleigh => standard_complex_normal(rng),
        })
        .collect();
    FadingRealization::new(coefficients, block_lengths.to_vec(), sigma2)
}

/// `CN(0, 1)` sample.
pub fn standard_complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// Passes a packet through the channel. Noise is drawn as unit-variance
/// samples scaled by `sigma`, so trials sharing a noise stream see the same
/// normalized noise at every SNR.
pub fn transmit(
    x: &[Complex64],
    channel: &FadingRealization,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    if x.len() != channel.packet_length() {
        return invalid(format!(
            "packet has {} symbols, channel blocks cover {}",
            x.len(),
            channel.packet_length()
        ));
    }
    let sigma = channel.sigma2.sqrt();
    let mut y = Vec::with_capacity(x.len());
    let mut start = 0;
    for (&h, &len) in channel.coefficients.iter().zip(&channel.block_lengths) {
        for &s in &x[start..start + len] {
            y.push(h * s + sigma * standard_complex_normal(rng));
        }
        start += len;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{map_symbols, Constellation};

    #[test]
    fn unit_phase_magnitude() {
        let mut rng = trial_rng(1, 0, Stream::Channel);
        let ch = sample_channel(&[10, 10, 10], 0.1, FadingModel::UnitPhase, &mut rng).unwrap();
        assert!(ch.coefficients.iter().all(|h| (h.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn phase_is_uniform_ks() {
        let mut rng = trial_rng(2, 0, Stream::Channel);
        let n = 100_000;
        let mut phases: Vec<f64> = (0..n)
            .map(|_| {
                let ch = sample_channel(&[1], 1.0, FadingModel::UnitPhase, &mut rng).unwrap();
                ch.coefficients[0].arg().rem_euclid(TAU) / TAU
            })
            .collect();
        phases.sort_by(f64::total_cmp);
        let d = phases
            .iter()
            .enumerate()
            .map(|(i, &p)| ((i + 1) as f64 / n as f64 - p).max(p - i as f64 / n as f64))
            .fold(0.0, f64::max);
        // Asymptotic Kolmogorov-Smirnov critical value at alpha = 0.01.
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn seeded_streams_repeat() {
        let draw = |trial| {
            let mut rng = trial_rng(77, trial, Stream::Channel);
            sample_channel(&[4, 4], 0.5, FadingModel::UnitPhase, &mut rng).unwrap()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
        let a = trial_rng(77, 3, Stream::Noise).random::<u64>();
        let b = trial_rng(77, 3, Stream::Channel).random::<u64>();
        assert_ne!(a, b);
    }

    #[test]
    fn noiseless_and_identity() {
        let c = Constellation::new(16).unwrap();
        let bits: Vec<u8> = (0..64).map(|i| (i * 7 % 3 % 2) as u8).collect();
        let x = map_symbols(&bits, &c).unwrap();
        let h = vec![Complex64::from_polar(0.7, 1.1), Complex64::new(1.0, 0.0)];
        let ch = FadingRealization::new(h.clone(), vec![6, 10], 0.0).unwrap();
        let mut rng = trial_rng(1, 1, Stream::Noise);
        let y = transmit(&x, &ch, &mut rng).unwrap();
        for i in 0..16 {
            let hb = if i < 6 { h[0] } else { h[1] };
            assert_eq!(y[i], hb * x[i]);
        }
        assert!(transmit(&x[..5], &ch, &mut rng).is_err());
    }

    #[test]
    fn noise_and_energy_statistics() {
        let n = 1_000_000;
        let sigma2 = 0.3;
        let ch = FadingRealization::new(vec![Complex64::new(1.0, 0.0)], vec![n], sigma2).unwrap();
        let mut rng = trial_rng(5, 0, Stream::Noise);
        let y = transmit(&vec![Complex64::new(0.0, 0.0); n], &ch, &mut rng).unwrap();
        let vre = y.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
        let vim = y.iter().map(|v| v.im * v.im).sum::<f64>() / n as f64;
        assert!((vre / (sigma2 / 2.0) - 1.0).abs() < 0.02);
        assert!((vim / (sigma2 / 2.0) - 1.0).abs() < 0.02);

        let c = Constellation::new(4).unwrap();
        let bits: Vec<u8> = (0..2 * n).map(|_| rng.random_range(0..2)).collect();
        let x = map_symbols(&bits, &c).unwrap();
        let h = Complex64::from_polar(0.8, 0.4);
        let ch = FadingRealization::new(vec![h], vec![n], sigma2).unwrap();
        let y = transmit(&x, &ch, &mut rng).unwrap();
        let e = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((e / (0.64 + sigma2) - 1.0).abs() < 0.01, "energy {e}");
    }

    #[test]
    fn snr_conversion() {
        assert!((noise_variance(0.0) - 1.0).abs() < 1e-15);
        assert!((noise_variance(10.0) - 0.1).abs() < 1e-15);
    }
}
