//! Blind processing of one coded-pilot block.
//!
//! The received block is `y = h x + n` with `h = |h| e^{j(m pi/2 + phi)}`.
//! Magnitude and the fractional offset `phi` come from moment and
//! fourth-power statistics. After derotating by `phi` the decoder sees the
//! codeword rotated by `m` quarter turns, which is again a codeword of the
//! extended code (monitor bits `u_{N-2}, u_{N-1}` treated as information).
//! The monitor values identify `m`.
//!
//! With the Gray labeling `x = ((1-2c0) + j(1-2c1)) / sqrt(2)` a quarter turn
//! maps each bit pair `(c0, c1)` to `(!c1, c0)`: adjacent pairs swap and the
//! even positions flip. In the u domain the swap is `u'_v = u_v ^ u_{v-1}`
//! for odd `v` (even `v` unchanged) and the flip adds row `N-2` of the
//! transform, so a quarter turn raises `u_{N-2}`. A half turn complements the
//! codeword, which adds row `N-1`.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::modem::{map_symbols, Constellation};
use crate::polar::{crc_check, polar_transform, scl_candidates, PolarCodeSpec};
use crate::rate_match::{de_rate_match, rate_match, RateMatchSpec};
use crate::saturate;

/// Channel knowledge extracted from one coded-pilot block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlindEstimate {
    pub magnitude: f64,
    /// Fractional phase in `[0, pi/2)`.
    pub offset: f64,
    /// Integer ambiguity, quarter turns.
    pub ambiguity: u8,
    /// Correlation estimate against the re-encoded block.
    pub h_hat: Complex64,
    pub variance: f64,
}

impl BlindEstimate {
    /// `|h| e^{j(m pi/2 + phi)}` before re-estimation.
    pub fn assembled(&self) -> Complex64 {
        Complex64::from_polar(
            self.magnitude,
            self.ambiguity as f64 * FRAC_PI_2 + self.offset,
        )
    }
}

/// Result of decoding one coded-pilot block.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotDecision {
    /// Unrotated u-domain word, monitors cleared.
    pub u_hat: Vec<u8>,
    /// Bits on the information set, CRC included when the code has one.
    pub info: Vec<u8>,
    pub ambiguity: u8,
    /// Re-encoded, re-modulated block used as implicit pilots.
    pub symbols: Vec<Complex64>,
    /// CRC status; true when the code carries no CRC.
    pub crc_ok: bool,
}

/// `sqrt(max(0, mean |y|^2 - sigma^2))`.
pub fn estimate_magnitude(y: &[Complex64], sigma2: f64) -> Result<f64> {
    if y.is_empty() {
        return invalid("magnitude estimate needs at least one sample");
    }
    let power = y.iter().map(|s| s.norm_sqr()).sum::<f64>() / y.len() as f64;
    Ok((power - sigma2).max(0.0).sqrt())
}

/// Fourth-power (Viterbi and Viterbi) estimate of the phase modulo pi/2,
/// returned in `[0, pi/2)`. Zero samples are skipped.
pub fn estimate_phase_offset(y: &[Complex64]) -> Result<f64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for s in y {
        let r = s.norm();
        if r > 0.0 {
            acc += s.powi(4) / (r * r * r);
        }
    }
    if acc.norm() == 0.0 {
        return Err(Error::EstimationFailure(
            "fourth-power statistic vanished".into(),
        ));
    }
    let phi = (acc.arg() / 4.0 - FRAC_PI_4).rem_euclid(FRAC_PI_2);
    // rem_euclid can return exactly pi/2 after rounding.
    Ok(if phi >= FRAC_PI_2 - 1e-12 { 0.0 } else { phi })
}

/// Quarter-turn count encoded by the monitor bits `[u_{N-2}, u_{N-1}]`.
pub fn ambiguity_from_monitors(u_hat: &[u8]) -> u8 {
    let n = u_hat.len();
    match (u_hat[n - 2] & 1, u_hat[n - 1] & 1) {
        (0, 0) => 0,
        (1, 0) => 1,
        (0, 1) => 2,
        _ => 3,
    }
}

/// u-domain image of the adjacent-pair swap; an involution.
fn swap_pairs_u(u: &mut [u8]) {
    for v in (1..u.len()).step_by(2) {
        u[v] ^= u[v - 1];
    }
}

/// u-domain word of the codeword rotated by `m` quarter turns.
pub fn rotate_u(u: &[u8], m: u8) -> Vec<u8> {
    let n = u.len();
    let mut out = u.to_vec();
    if m & 1 == 1 {
        swap_pairs_u(&mut out);
        out[n - 2] ^= 1;
    }
    if m & 2 == 2 {
        out[n - 1] ^= 1;
    }
    out
}

/// Maps a decoded rotated word back to the `m = 0` word.
pub fn recover_unrotated(u_rotated: &[u8], m: u8) -> Vec<u8> {
    let n = u_rotated.len();
    let mut u = u_rotated.to_vec();
    if m & 2 == 2 {
        u[n - 1] ^= 1;
    }
    if m & 1 == 1 {
        u[n - 2] ^= 1;
        swap_pairs_u(&mut u);
    }
    u
}

/// Whether the frozen set is closed under quarter turns: every frozen odd
/// index must have a frozen predecessor.
pub fn rotation_compatible(spec: &PolarCodeSpec) -> bool {
    let decoded = spec.decoded_mask();
    let n = spec.length();
    (1..n - 2)
        .step_by(2)
        .all(|v| decoded[v] || !decoded[v - 1])
}

/// Closed-form Gray QPSK LLRs `2 sqrt(2) |h| Re/Im(y) / sigma^2`.
pub fn qpsk_llrs(y: &[Complex64], magnitude: f64, sigma2: f64) -> Vec<f64> {
    let scale = 2.0 * SQRT_2 * magnitude / sigma2;
    y.iter()
        .flat_map(|s| [saturate(scale * s.re), saturate(scale * s.im)])
        .collect()
}

fn derotate(y: &[Complex64], angle: f64) -> Vec<Complex64> {
    let r = Complex64::from_polar(1.0, -angle);
    y.iter().map(|s| s * r).collect()
}

fn remodulate(spec: &PolarCodeSpec, rm: &RateMatchSpec, u: &[u8]) -> Result<Vec<Complex64>> {
    let mut u = u.to_vec();
    for &i in spec.monitor_set() {
        u[i] = 0;
    }
    let bits = rate_match(&polar_transform(&u)?, rm)?;
    map_symbols(&bits, &Constellation::new(4)?)
}

fn check_pilot_code(spec: &PolarCodeSpec) -> Result<()> {
    let n = spec.length();
    if n < 4 || spec.monitor_set() != [n - 2, n - 1] {
        return invalid("coded-pilot code must monitor N-2 and N-1");
    }
    Ok(())
}

/// Decodes a coded-pilot block derotated by `offset`, resolving the residual
/// quarter turns from the monitor bits.
///
/// Among the list candidates, the most likely one whose unrotated message
/// passes the CRC wins; without a CRC the most likely candidate is taken.
pub fn blind_decode_pilot(
    y: &[Complex64],
    spec: &PolarCodeSpec,
    rm: &RateMatchSpec,
    magnitude: f64,
    offset: f64,
    sigma2: f64,
    list_size: usize,
) -> Result<PilotDecision> {
    check_pilot_code(spec)?;
    if 2 * y.len() != rm.target_length {
        return invalid(format!(
            "expected {} pilot symbols, got {}",
            rm.target_length / 2,
            y.len()
        ));
    }
    let llrs = qpsk_llrs(&derotate(y, offset), magnitude, sigma2);
    let candidates = scl_candidates(spec, &de_rate_match(&llrs, rm)?, list_size)?;
    let check = spec.crc_length() > 0;
    let unrotated: Vec<(u8, Vec<u8>)> = candidates
        .iter()
        .map(|c| {
            let m = ambiguity_from_monitors(&c.u_hat);
            (m, recover_unrotated(&c.u_hat, m))
        })
        .collect();
    let (pick, crc_ok) = match unrotated
        .iter()
        .position(|(_, u)| !check || crc_check(&spec.extract_info(u)))
    {
        Some(p) => (p, true),
        None => (0, false),
    };
    let (ambiguity, mut u_hat) = unrotated.into_iter().nth(pick).expect("non-empty list");
    for &i in spec.monitor_set() {
        u_hat[i] = 0;
    }
    Ok(PilotDecision {
        info: spec.extract_info(&u_hat),
        symbols: remodulate(spec, rm, &u_hat)?,
        u_hat,
        ambiguity,
        crc_ok,
    })
}

/// Reference recovery: derotate by the additional `m` quarter turns and
/// decode again. Slower than [`recover_unrotated`]; used to validate it.
pub fn redecode_unrotated(
    y: &[Complex64],
    spec: &PolarCodeSpec,
    rm: &RateMatchSpec,
    magnitude: f64,
    angle: f64,
    sigma2: f64,
    list_size: usize,
) -> Result<PilotDecision> {
    let first = blind_decode_pilot(y, spec, rm, magnitude, angle, sigma2, list_size)?;
    let total = angle + first.ambiguity as f64 * FRAC_PI_2;
    let llrs = qpsk_llrs(&derotate(y, total), magnitude, sigma2);
    let candidates = scl_candidates(spec, &de_rate_match(&llrs, rm)?, list_size)?;
    let check = spec.crc_length() > 0;
    let (best, crc_ok) = match candidates
        .iter()
        .find(|c| !check || crc_check(&spec.extract_info(&c.u_hat)))
    {
        Some(c) => (c, true),
        None => (&candidates[0], false),
    };
    let mut u_hat = best.u_hat.clone();
    for &i in spec.monitor_set() {
        u_hat[i] = 0;
    }
    Ok(PilotDecision {
        info: spec.extract_info(&u_hat),
        symbols: remodulate(spec, rm, &u_hat)?,
        u_hat,
        ambiguity: (first.ambiguity + ambiguity_from_monitors(&best.u_hat)) % 4,
        crc_ok,
    })
}

/// Correlation estimate `(1/N) sum y_i x_i^*` and its variance `sigma^2 / N`.
pub fn reestimate_channel(
    y: &[Complex64],
    x_hat: &[Complex64],
    sigma2: f64,
) -> Result<(Complex64, f64)> {
    if y.len() != x_hat.len() || y.is_empty() {
        return invalid("re-estimation needs equal, non-empty sequences");
    }
    let n = y.len() as f64;
    let h = y.iter().zip(x_hat).map(|(a, b)| a * b.conj()).sum::<Complex64>() / n;
    Ok((h, sigma2 / n))
}

/// Full blind stage of one block: estimate, decode, re-estimate.
///
/// A vanishing fourth-power statistic falls back to a zero offset; the
/// decision then rests on the CRC like any other bad block.
pub fn process_pilot_block(
    y: &[Complex64],
    spec: &PolarCodeSpec,
    rm: &RateMatchSpec,
    sigma2: f64,
    list_size: usize,
) -> Result<(BlindEstimate, PilotDecision)> {
    let magnitude = estimate_magnitude(y, sigma2)?;
    let offset = match estimate_phase_offset(y) {
        Ok(phi) => phi,
        Err(Error::EstimationFailure(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let decision = blind_decode_pilot(y, spec, rm, magnitude, offset, sigma2, list_size)?;
    let (h_hat, variance) = reestimate_channel(y, &decision.symbols, sigma2)?;
    let estimate = BlindEstimate {
        magnitude,
        offset,
        ambiguity: decision.ambiguity,
        h_hat,
        variance,
    };
    Ok((estimate, decision))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{standard_complex_normal, trial_rng, Stream};
    use crate::polar::{crc_attach, encode};
    use crate::rate_match::{RateMatchMode, RateMatchSpec};
    use crate::tx::testing::component;
    use rand::Rng;

    fn qpsk_block(bits: &[u8]) -> Vec<Complex64> {
        map_symbols(bits, &Constellation::new(4).unwrap()).unwrap()
    }

    fn rotate(y: &[Complex64], angle: f64) -> Vec<Complex64> {
        derotate(y, -angle)
    }

    #[test]
    fn magnitude_estimates() {
        let x = qpsk_block(&[0, 1, 1, 0, 1, 1]);
        assert!((estimate_magnitude(&x, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(estimate_magnitude(&[Complex64::new(0.0, 0.0); 4], 1.0).unwrap(), 0.0);
        assert!(estimate_magnitude(&[], 1.0).is_err());

        let mut rng = trial_rng(3, 0, Stream::Noise);
        let mut errors = Vec::new();
        for n in [1_000, 10_000, 100_000] {
            let y: Vec<Complex64> = (0..n)
                .map(|_| {
                    let k: u32 = rng.random_range(0..4);
                    let x = Complex64::from_polar(1.0, FRAC_PI_4 + k as f64 * FRAC_PI_2);
                    0.7 * x + 0.5f64.sqrt() * standard_complex_normal(&mut rng)
                })
                .collect();
            errors.push((estimate_magnitude(&y, 0.5).unwrap() - 0.7).abs());
        }
        assert!(errors[2] < 0.007, "{errors:?}");
        assert!(errors[2] < errors[0].max(1e-3), "{errors:?}");
    }

    #[test]
    fn phase_offset_closed_form() {
        let bits: Vec<u8> = (0..64).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let x = qpsk_block(&bits);
        assert!(estimate_phase_offset(&x).unwrap().abs() < 1e-12);
        let phi = estimate_phase_offset(&rotate(&x, 0.2)).unwrap();
        assert!((phi - 0.2).abs() < 1e-9);
        let phi = estimate_phase_offset(&rotate(&x, 0.2 + FRAC_PI_2)).unwrap();
        assert!((phi - 0.2).abs() < 1e-9);
        let mut y = rotate(&x, 1.0);
        y[3] = Complex64::new(0.0, 0.0);
        assert!((estimate_phase_offset(&y).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(
            estimate_phase_offset(&[Complex64::new(0.0, 0.0); 3]),
            Err(Error::EstimationFailure(_))
        ));
    }

    #[test]
    fn fourth_power_statistic_ignores_quarter_turns() {
        let mut rng = trial_rng(5, 0, Stream::Noise);
        let y: Vec<Complex64> = (0..50).map(|_| standard_complex_normal(&mut rng)).collect();
        let base = estimate_phase_offset(&y).unwrap();
        for m in 1..4 {
            let r = estimate_phase_offset(&rotate(&y, m as f64 * FRAC_PI_2)).unwrap();
            let d = (r - base).abs();
            assert!(d < 1e-12 || (FRAC_PI_2 - d) < 1e-12, "m={m}: {r} vs {base}");
        }
    }

    #[test]
    fn monitor_mapping() {
        let mut u = vec![0u8; 8];
        assert_eq!(ambiguity_from_monitors(&u), 0);
        u[6] = 1;
        assert_eq!(ambiguity_from_monitors(&u), 1);
        u[6] = 0;
        u[7] = 1;
        assert_eq!(ambiguity_from_monitors(&u), 2);
        u[6] = 1;
        assert_eq!(ambiguity_from_monitors(&u), 3);
    }

    /// Brute-force oracle: rotate the symbols, hard-demap, and invert the
    /// polar transform.
    fn rotated_u_oracle(u: &[u8], m: u8) -> Vec<u8> {
        let x = qpsk_block(&polar_transform(u).unwrap());
        let y = rotate(&x, m as f64 * FRAC_PI_2);
        let bits: Vec<u8> = y.iter().flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8]).collect();
        polar_transform(&bits).unwrap()
    }

    #[test]
    fn rotation_algebra_matches_symbols() {
        let mut rng = trial_rng(8, 0, Stream::Message);
        for n in [4usize, 8, 16, 64] {
            for _ in 0..50 {
                let u: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
                for m in 0..4 {
                    let r = rotate_u(&u, m);
                    assert_eq!(r, rotated_u_oracle(&u, m), "n={n} m={m}");
                    assert_eq!(recover_unrotated(&r, m), u);
                }
            }
        }
        // Half turn complements the codeword.
        let u = vec![1u8, 0, 0, 1, 1, 0, 0, 0];
        let c = polar_transform(&u).unwrap();
        let c2 = polar_transform(&rotate_u(&u, 2)).unwrap();
        assert!(c.iter().zip(&c2).all(|(a, b)| a ^ b == 1));
    }

    #[test]
    fn reestimation() {
        let bits: Vec<u8> = (0..64).map(|i| (i % 3 == 1) as u8).collect();
        let x = qpsk_block(&bits);
        let h = Complex64::new(0.3, -0.8);
        let y: Vec<Complex64> = x.iter().map(|s| h * s).collect();
        let (est, var) = reestimate_channel(&y, &x, 0.1).unwrap();
        assert!((est - h).norm() < 1e-15);
        assert!((var - 0.1 / 32.0).abs() < 1e-18);
        let mut wrong = x.clone();
        wrong[5] = -wrong[5];
        let (est, _) = reestimate_channel(&y, &wrong, 0.1).unwrap();
        assert!((est - h).norm() <= 2.0 / 32.0 + 1e-12);

        let mut rng = trial_rng(11, 0, Stream::Noise);
        let x = &x[..32];
        let trials = 100_000;
        let sigma2: f64 = 0.1;
        let mut acc = 0.0;
        for _ in 0..trials {
            let y: Vec<Complex64> = x
                .iter()
                .map(|s| s + sigma2.sqrt() * standard_complex_normal(&mut rng))
                .collect();
            acc += (reestimate_channel(&y, x, sigma2).unwrap().0 - 1.0).norm_sqr();
        }
        let var = acc / trials as f64;
        assert!((var / (sigma2 / 32.0) - 1.0).abs() < 0.05, "{var}");
    }

    fn pilot_component(info: usize, symbols: usize) -> (PolarCodeSpec, RateMatchSpec) {
        let cc = component(info, 2 * symbols, true, 11);
        (cc.code, cc.rate_match)
    }

    #[test]
    fn noiseless_rotation_equivariance() {
        let mut rng = trial_rng(21, 0, Stream::Message);
        let cases = [(4, 10), (8, 16), (16, 32), (20, 34), (20, 40), (20, 64), (40, 100)];
        for &(k, symbols) in &cases {
            let (spec, rm) = pilot_component(k + 11, symbols);
            assert!(rotation_compatible(&spec), "{k} {symbols}");
            let modes = rm.mode;
            for trial in 0..1000 / cases.len() {
                let msg: Vec<u8> = (0..k).map(|_| rng.random_range(0..2u8)).collect();
                let info = crc_attach(&msg);
                let bits = rate_match(&encode(&spec, &info).unwrap(), &rm).unwrap();
                let x = qpsk_block(&bits);
                let m = (trial % 4) as u8;
                let offset = (trial % 64) as f64 / 64.0 * FRAC_PI_2;
                let y = rotate(&x, m as f64 * FRAC_PI_2 + offset);
                let phi = estimate_phase_offset(&y).unwrap();
                let d = blind_decode_pilot(&y, &spec, &rm, 1.0, phi, 1e-3, 4).unwrap();
                assert!(d.crc_ok, "{modes:?} k={k} m={m}");
                assert_eq!(d.info, info);
                // Offsets that round to pi/2 are folded into the ambiguity.
                let expect = if (phi - offset).abs() < 1e-6 { m } else { (m + 1) % 4 };
                assert_eq!(d.ambiguity, expect);
                for (a, b) in d.symbols.iter().zip(&x) {
                    assert!((a - b).norm() < 1e-12);
                }
                let r = redecode_unrotated(&y, &spec, &rm, 1.0, phi, 1e-3, 4).unwrap();
                assert_eq!(r.u_hat, d.u_hat);
                assert_eq!(r.ambiguity, d.ambiguity);
            }
        }
    }

    #[test]
    fn all_rate_match_modes_are_pair_preserving() {
        let mut seen = std::collections::HashSet::new();
        for &(k, s) in &[(4usize, 10usize), (8, 16), (20, 34), (20, 64)] {
            let (_, rm) = pilot_component(k + 11, s);
            seen.insert(rm.mode);
        }
        assert!(seen.contains(&RateMatchMode::Puncture));
        assert!(seen.contains(&RateMatchMode::Repeat));
        assert!(seen.contains(&RateMatchMode::None));
        assert!(RateMatchSpec::for_coded_pilot(RateMatchMode::Shorten, 64, 40).is_err());
    }

    #[test]
    fn full_block_processing() {
        let (spec, rm) = pilot_component(16 + 11, 32);
        let msg: Vec<u8> = (0..16).map(|i| (i % 4 == 1) as u8).collect();
        let info = crc_attach(&msg);
        let x = qpsk_block(&rate_match(&encode(&spec, &info).unwrap(), &rm).unwrap());
        let h = Complex64::from_polar(0.8, 2.5);
        let y: Vec<Complex64> = x.iter().map(|s| h * s).collect();
        let (est, d) = process_pilot_block(&y, &spec, &rm, 0.0, 8).unwrap();
        assert_eq!(d.info, info);
        assert!((est.h_hat - h).norm() < 1e-12);
        assert!((est.assembled() - h).norm() < 1e-9);
        assert_eq!(est.variance, 0.0);
        assert_eq!(est.ambiguity, 1);
    }
}
