//! Packet receivers: the two-stage hybrid receiver for split packets and the
//! pilot-aided baseline.

use num_complex::Complex64;

use crate::blind::{blind_decode_pilot, process_pilot_block, BlindEstimate};
use crate::error::{invalid, Result};
use crate::modem::{Constellation, Demapper};
use crate::polar::{crc_check, scl_candidates, scl_decode, PolarCodeSpec, SclCandidate, CRC11_LEN};
use crate::rate_match::de_rate_match;
use crate::tx::{CrcPolicy, PilotAidedConfig, SplitConfig};

/// What the hybrid receiver knows about the channel.
#[derive(Debug, Clone, Copy, Default)]
pub enum ChannelKnowledge<'a> {
    /// Everything is estimated from the coded pilots.
    #[default]
    Blind,
    /// True coefficients per block; estimation error is zero.
    Genie(&'a [Complex64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutput {
    /// Best guess of the `K` message bits, even when a check fails.
    pub message: Vec<u8>,
    /// CRC status per component, data component first. Components without
    /// a CRC report `true`.
    pub component_ok: Vec<bool>,
    pub estimates: Vec<BlindEstimate>,
}

impl HybridOutput {
    pub fn crc_ok(&self) -> bool {
        self.component_ok.iter().all(|&ok| ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotAidedOutput {
    pub message: Vec<u8>,
    pub crc_ok: bool,
    pub h_hat: Vec<Complex64>,
}

/// First candidate satisfying `accept`, else the most likely one.
fn select(
    candidates: &[SclCandidate],
    accept: impl Fn(&SclCandidate) -> bool,
) -> (&SclCandidate, bool) {
    match candidates.iter().find(|c| accept(c)) {
        Some(c) => (c, true),
        None => (&candidates[0], false),
    }
}

/// Demaps data samples with per-block estimates into transmit-order LLRs.
fn data_llrs(
    blocks: &[(&[Complex64], Complex64, f64)],
    c: &Constellation,
    capacity: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(capacity);
    for &(y, h, var) in blocks {
        Demapper::new(c, h, var).demap_block(y, &mut out);
    }
    out
}

/// Two-stage decoding of a split packet with blind channel estimation.
pub fn hybrid_decode(
    y: &[Complex64],
    cfg: &SplitConfig,
    sigma2: f64,
    list_size: usize,
) -> Result<HybridOutput> {
    hybrid_decode_with(y, cfg, sigma2, list_size, ChannelKnowledge::Blind)
}

pub fn hybrid_decode_with(
    y: &[Complex64],
    cfg: &SplitConfig,
    sigma2: f64,
    list_size: usize,
    knowledge: ChannelKnowledge<'_>,
) -> Result<HybridOutput> {
    if y.len() != cfg.total_symbols() {
        return invalid(format!(
            "expected {} received symbols, got {}",
            cfg.total_symbols(),
            y.len()
        ));
    }
    if let ChannelKnowledge::Genie(h) = knowledge {
        if h.len() != cfg.blocks() {
            return invalid("genie needs one coefficient per block");
        }
    }
    let layout = cfg.layout();
    let mut estimates = Vec::with_capacity(cfg.blocks());
    let mut pilot_infos = Vec::with_capacity(cfg.blocks());
    let mut component_ok = vec![true; cfg.blocks() + 1];
    for (b, slot) in layout.iter().enumerate() {
        let yb = &y[slot.pilot.clone()];
        let cc = &cfg.components[b + 1];
        let (estimate, decision) = match knowledge {
            ChannelKnowledge::Blind => {
                process_pilot_block(yb, &cc.code, &cc.rate_match, sigma2, list_size)?
            }
            ChannelKnowledge::Genie(h) => {
                let h = h[b];
                let d = blind_decode_pilot(
                    yb,
                    &cc.code,
                    &cc.rate_match,
                    h.norm(),
                    h.arg(),
                    sigma2,
                    list_size,
                )?;
                let e = BlindEstimate {
                    magnitude: h.norm(),
                    offset: h.arg().rem_euclid(std::f64::consts::FRAC_PI_2),
                    ambiguity: d.ambiguity,
                    h_hat: h,
                    variance: 0.0,
                };
                (e, d)
            }
        };
        component_ok[b + 1] = decision.crc_ok;
        estimates.push(estimate);
        pilot_infos.push(decision.info);
    }

    let qam = cfg.constellation()?;
    let per_block: Vec<(&[Complex64], Complex64, f64)> = layout
        .iter()
        .zip(&estimates)
        .map(|(slot, e)| (&y[slot.data.clone()], e.h_hat, sigma2 + e.variance))
        .collect();
    let coded = cfg.coded_lengths()[0];
    let llrs = cfg.bicm().deinterleave(&data_llrs(&per_block, &qam, coded));
    let data = &cfg.components[0];
    let mother = de_rate_match(&llrs, &data.rate_match)?;
    let candidates = scl_candidates(&data.code, &mother, list_size)?;

    let payload = |b: usize, info: &[u8]| info[..cfg.info_bits[b]].to_vec();
    let pilots_message: Vec<u8> = pilot_infos
        .iter()
        .enumerate()
        .flat_map(|(b, info)| payload(b + 1, info))
        .collect();
    let assemble = |info0: &[u8]| {
        let mut m = payload(0, info0);
        m.extend_from_slice(&pilots_message);
        m
    };
    let code: &PolarCodeSpec = &data.code;
    let (best, ok) = match cfg.crc_policy {
        CrcPolicy::PerComponent => select(&candidates, |c| crc_check(&code.extract_info(&c.u_hat))),
        CrcPolicy::AggregateOnZero => select(&candidates, |c| {
            let info = code.extract_info(&c.u_hat);
            let mut full = assemble(&info);
            full.extend_from_slice(&info[info.len() - CRC11_LEN..]);
            crc_check(&full)
        }),
    };
    component_ok[0] = ok;
    Ok(HybridOutput {
        message: assemble(&code.extract_info(&best.u_hat)),
        component_ok,
        estimates,
    })
}

/// Per-block least-squares estimates from known pilots. A block without
/// pilots is taken as `h = 1` with no estimation variance.
pub fn pilot_estimates(
    y: &[Complex64],
    cfg: &PilotAidedConfig,
    sigma2: f64,
) -> Vec<(Complex64, f64)> {
    cfg.layout()
        .iter()
        .enumerate()
        .map(|(b, slot)| {
            let n = slot.pilot.len();
            if n == 0 {
                return (Complex64::new(1.0, 0.0), 0.0);
            }
            let p = cfg.pilot_sequence(b);
            let h = y[slot.pilot.clone()]
                .iter()
                .zip(&p)
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                / n as f64;
            (h, sigma2 / n as f64)
        })
        .collect()
}

/// Coherent decoding of a pilot-aided packet.
pub fn pilot_aided_decode(
    y: &[Complex64],
    cfg: &PilotAidedConfig,
    sigma2: f64,
    list_size: usize,
) -> Result<PilotAidedOutput> {
    if y.len() != cfg.total_symbols() {
        return invalid(format!(
            "expected {} received symbols, got {}",
            cfg.total_symbols(),
            y.len()
        ));
    }
    let estimates = pilot_estimates(y, cfg, sigma2);
    let qam = Constellation::new(cfg.modulation)?;
    let per_block: Vec<(&[Complex64], Complex64, f64)> = cfg
        .layout()
        .iter()
        .zip(&estimates)
        .map(|(slot, &(h, var))| (&y[slot.data.clone()], h, sigma2 + var))
        .collect();
    let llrs = cfg
        .bicm()
        .deinterleave(&data_llrs(&per_block, &qam, cfg.coded_length()));
    let mother = de_rate_match(&llrs, &cfg.code.rate_match)?;
    let out = scl_decode(&cfg.code.code, &mother, list_size)?;
    Ok(PilotAidedOutput {
        message: out.message[..cfg.info_bits].to_vec(),
        crc_ok: out.crc_ok,
        h_hat: estimates.into_iter().map(|(h, _)| h).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, transmit, trial_rng, FadingModel, Stream};
    use crate::tx::testing::{pilot_aided_config, split_config};
    use crate::tx::{encode_packet, pilot_aided_encode};
    use rand::Rng;

    fn random_message(len: usize, trial: u64) -> Vec<u8> {
        let mut rng = trial_rng(1, trial, Stream::Message);
        (0..len).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn noiseless_hybrid_roundtrip() {
        let configs = [
            split_config(vec![100], vec![20], vec![150, 9], 16, CrcPolicy::PerComponent),
            split_config(vec![60, 60, 60], vec![16, 16, 16], vec![330, 10, 10, 10], 16, CrcPolicy::PerComponent),
            split_config(vec![64, 64], vec![8, 8], vec![300, 4, 4], 64, CrcPolicy::AggregateOnZero),
            split_config(vec![50, 50], vec![10, 12], vec![60, 6, 6], 4, CrcPolicy::AggregateOnZero),
        ];
        for (i, cfg) in configs.iter().enumerate() {
            for trial in 0..20 {
                let msg = random_message(cfg.message_len(), trial);
                let x = encode_packet(&msg, cfg).unwrap();
                let mut rng = trial_rng(2, trial, Stream::Channel);
                let ch = sample_channel(&cfg.block_lengths, 0.0, FadingModel::Rayleigh, &mut rng).unwrap();
                let y = transmit(&x, &ch, &mut rng).unwrap();
                let out = hybrid_decode(&y, cfg, 0.0, 4).unwrap();
                assert!(out.crc_ok(), "config {i} trial {trial}");
                assert_eq!(out.message, msg, "config {i} trial {trial}");
                for (e, h) in out.estimates.iter().zip(&ch.coefficients) {
                    assert!((e.h_hat - h).norm() < 1e-9);
                    assert_eq!(e.variance, 0.0);
                }
            }
        }
    }

    #[test]
    fn effective_variance_includes_estimation_error() {
        let cfg = split_config(vec![80, 80], vec![16, 20], vec![200, 8, 8], 16, CrcPolicy::PerComponent);
        let msg = random_message(cfg.message_len(), 0);
        let x = encode_packet(&msg, &cfg).unwrap();
        let sigma2 = 0.05;
        let mut rng = trial_rng(4, 0, Stream::Channel);
        let ch = sample_channel(&cfg.block_lengths, sigma2, FadingModel::UnitPhase, &mut rng).unwrap();
        let y = transmit(&x, &ch, &mut rng).unwrap();
        let out = hybrid_decode(&y, &cfg, sigma2, 8).unwrap();
        assert!((out.estimates[0].variance - sigma2 / 16.0).abs() < 1e-15);
        assert!((out.estimates[1].variance - sigma2 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn corrupted_pilot_block_is_flagged() {
        let cfg = split_config(vec![60, 60, 60], vec![16, 16, 16], vec![330, 10, 10, 10], 16, CrcPolicy::PerComponent);
        let msg = random_message(cfg.message_len(), 3);
        let mut y = encode_packet(&msg, &cfg).unwrap();
        let slot = &cfg.layout()[1];
        let mut rng = trial_rng(9, 0, Stream::Noise);
        for s in &mut y[slot.pilot.clone()] {
            *s = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        }
        let out = hybrid_decode(&y, &cfg, 1e-3, 4).unwrap();
        assert!(!out.component_ok[2]);
        assert!(!out.crc_ok());
        assert_eq!(out.message.len(), msg.len());
    }

    #[test]
    fn genie_is_exact_when_noiseless() {
        let cfg = split_config(vec![100, 100], vec![12, 12], vec![250, 6, 6], 16, CrcPolicy::PerComponent);
        let msg = random_message(cfg.message_len(), 5);
        let x = encode_packet(&msg, &cfg).unwrap();
        let mut rng = trial_rng(6, 0, Stream::Channel);
        let ch = sample_channel(&cfg.block_lengths, 0.0, FadingModel::UnitPhase, &mut rng).unwrap();
        let y = transmit(&x, &ch, &mut rng).unwrap();
        let out = hybrid_decode_with(&y, &cfg, 0.0, 4, ChannelKnowledge::Genie(&ch.coefficients)).unwrap();
        assert_eq!(out.message, msg);
        assert!(hybrid_decode_with(&y, &cfg, 0.0, 4, ChannelKnowledge::Genie(&[])).is_err());
    }

    #[test]
    fn pilot_aided_roundtrip() {
        for (blocks, pilots) in [(vec![60, 60, 60], vec![8, 8, 8]), (vec![100], vec![0])] {
            let k = 200;
            let cfg = pilot_aided_config(blocks, pilots, k, 16);
            let msg = random_message(k, 7);
            let x = pilot_aided_encode(&msg, &cfg).unwrap();
            let model = if cfg.pilot_lengths[0] == 0 { None } else { Some(FadingModel::Rayleigh) };
            let mut rng = trial_rng(8, 0, Stream::Channel);
            let ch = match model {
                Some(m) => sample_channel(&cfg.block_lengths, 0.0, m, &mut rng).unwrap(),
                None => crate::channel::FadingRealization::new(vec![Complex64::new(1.0, 0.0)], cfg.block_lengths.clone(), 0.0).unwrap(),
            };
            let y = transmit(&x, &ch, &mut rng).unwrap();
            let out = pilot_aided_decode(&y, &cfg, 0.0, 4).unwrap();
            assert!(out.crc_ok);
            assert_eq!(out.message, msg);
            for (a, b) in out.h_hat.iter().zip(&ch.coefficients) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn more_pilots_lower_estimate_variance() {
        let sigma2 = 0.5;
        let mut mse = Vec::new();
        for np in [8, 32] {
            let cfg = pilot_aided_config(vec![100], vec![np], 100, 16);
            let msg = vec![0u8; 100];
            let x = pilot_aided_encode(&msg, &cfg).unwrap();
            let mut acc = 0.0;
            for t in 0..10_000 {
                let mut rng = trial_rng(12, t, Stream::Channel);
                let ch = sample_channel(&cfg.block_lengths, sigma2, FadingModel::UnitPhase, &mut rng).unwrap();
                let y = transmit(&x, &ch, &mut rng).unwrap();
                let est = pilot_estimates(&y, &cfg, sigma2);
                acc += (est[0].0 - ch.coefficients[0]).norm_sqr();
            }
            mse.push(acc / 10_000.0);
        }
        assert!(mse[1] < mse[0]);
        assert!((mse[0] / (sigma2 / 8.0) - 1.0).abs() < 0.05, "{mse:?}");
    }
}
