//! Quick end-to-end checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{simulate_point, thread_pool, Link, StopRule};
use crate::blind::{estimate_phase_offset, recover_unrotated, rotate_u};
use crate::channel::{sample_channel, trial_rng, FadingModel, Stream};
use crate::design::{design_pilot_aided, optimize_split, psi, psi_inv, PilotAidedRequest, SnrGrid, SplitRequest};
use crate::error::Result;
use crate::modem::DEFAULT_BICM_SEED;
use crate::rx::{hybrid_decode_with, ChannelKnowledge};
use crate::tx::{encode_packet, CrcPolicy};
use crate::Complex64;

/// Outcome of each check.
#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<(String, bool)>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

/// Runs a fixed battery of fast consistency checks.
pub fn selftest(seed: u64, threads: usize) -> Result<SelftestReport> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ok = [0.1, 1.0, 10.0, 50.0, 100.0]
        .iter()
        .all(|&m| (psi_inv(psi(m)) - m).abs() <= 1e-6 * m.max(1.0));
    checks.push(("psi roundtrip".to_string(), ok));

    let ok = (0..64).all(|i| {
        let phi = i as f64 * std::f64::consts::FRAC_PI_2 / 64.0;
        let y: Vec<Complex64> = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(a, b)| Complex64::new(a, b) * Complex64::from_polar(1.0, phi))
            .collect();
        let Ok(est) = estimate_phase_offset(&y) else {
            return false;
        };
        let d = (est - phi).rem_euclid(std::f64::consts::FRAC_PI_2);
        d.min(std::f64::consts::FRAC_PI_2 - d) < 1e-9
    });
    checks.push(("fourth-power phase estimate".to_string(), ok));

    let ok = (0..100).all(|_| {
        let u: Vec<u8> = (0..32).map(|_| rng.random_range(0..2u8)).collect();
        (0..4).all(|m| recover_unrotated(&rotate_u(&u, m), m) == u)
    });
    checks.push(("rotation inverse".to_string(), ok));

    let grid = SnrGrid::default();
    let req = SplitRequest {
        block_lengths: vec![60, 60, 60],
        pilot_symbols: vec![8, 8, 8],
        message_bits: 360,
        modulation: 16,
        crc_policy: CrcPolicy::AggregateOnZero,
        bicm_seed: Some(DEFAULT_BICM_SEED),
    };
    let design = optimize_split(&req, 1e-2, &grid)?;
    checks.push(("split design meets target".to_string(), design.target_met));

    let cfg = &design.config;
    let ok = (0..100u64).all(|t| {
        let mut r = trial_rng(seed, t, Stream::Message);
        let msg: Vec<u8> = (0..cfg.message_len()).map(|_| r.random_range(0..2u8)).collect();
        let mut c = trial_rng(seed, t, Stream::Channel);
        let Ok(ch) = sample_channel(&cfg.block_lengths, 0.0, FadingModel::UnitPhase, &mut c) else {
            return false;
        };
        let Ok(x) = encode_packet(&msg, cfg) else {
            return false;
        };
        let mut y = Vec::with_capacity(x.len());
        let mut start = 0;
        for (b, &len) in cfg.block_lengths.iter().enumerate() {
            y.extend(x[start..start + len].iter().map(|s| s * ch.coefficients[b]));
            start += len;
        }
        hybrid_decode_with(&y, cfg, 1e-6, 1, ChannelKnowledge::Blind).is_ok_and(|o| o.crc_ok() && o.message == msg)
    });
    checks.push(("noiseless hybrid roundtrip".to_string(), ok));

    let pa = design_pilot_aided(
        &PilotAidedRequest {
            block_lengths: vec![60, 60, 60],
            pilot_lengths: vec![8, 8, 8],
            message_bits: 360,
            modulation: 16,
            bicm_seed: Some(DEFAULT_BICM_SEED),
            pilot_seed: seed,
        },
        1e-2,
        &grid,
    )?;
    let pool = thread_pool(threads)?;
    let stop = StopRule { min_errors: 1, min_trials: 0, max_trials: 200 };
    let mut clean = true;
    for link in [Link::CodedPilot(cfg), Link::PilotAided(&pa.config)] {
        let row = simulate_point(link, 30.0, seed, stop, FadingModel::UnitPhase, 4, &pool)?;
        clean &= row.block_errors == 0;
    }
    checks.push(("no errors at 30 dB".to_string(), clean));

    Ok(SelftestReport { checks })
}
