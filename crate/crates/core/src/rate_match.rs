//! Quasi-uniform puncturing, shortening and repetition around the 32-way
//! sub-block interleaver, mapping a mother codeword of length `N` to `M`
//! transmitted bits and LLRs back again.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::LLR_MAX;

/// Sub-block permutation applied to the 32 equal slices of a codeword.
pub const SUBBLOCK_PATTERN: [usize; 32] = [
    0, 1, 2, 4, 3, 5, 6, 7, 8, 16, 9, 17, 10, 18, 11, 19, 12, 20, 13, 21, 14, 22, 15, 23, 24, 25,
    26, 28, 27, 29, 30, 31,
];

/// Component rate at or above which data components shorten instead of
/// puncture.
pub const SHORTEN_THRESHOLD: f64 = 0.55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMatchMode {
    None,
    Puncture,
    Shorten,
    Repeat,
}

/// How a mother codeword of length `mother_length` becomes `target_length`
/// transmitted bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateMatchSpec {
    pub mode: RateMatchMode,
    pub mother_length: usize,
    pub target_length: usize,
    /// Whether the sub-block interleaver is applied (otherwise identity).
    pub subblock: bool,
}

impl RateMatchSpec {
    /// Data-component rate matching; the interleaver is used whenever `N >= 32`.
    pub fn new(mode: RateMatchMode, mother_length: usize, target_length: usize) -> Result<Self> {
        let spec = Self {
            mode,
            mother_length,
            target_length,
            subblock: mother_length >= 32,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Coded-pilot rate matching.
    ///
    /// QPSK rotations act on adjacent bit pairs, so the interleaver must move
    /// pairs as units. The sub-block pattern does that only when slices hold
    /// at least two bits, i.e. `N >= 64`; shorter pilots use the identity.
    pub fn for_coded_pilot(
        mode: RateMatchMode,
        mother_length: usize,
        target_length: usize,
    ) -> Result<Self> {
        if mode == RateMatchMode::Shorten {
            return invalid("coded-pilot components cannot be shortened");
        }
        let spec = Self {
            mode,
            mother_length,
            target_length,
            subblock: mother_length >= 64,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.mother_length, self.target_length);
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("mother length {n} is not a power of two"));
        }
        if m == 0 {
            return invalid("target length must be positive");
        }
        let ok = match self.mode {
            RateMatchMode::None => m == n,
            RateMatchMode::Puncture | RateMatchMode::Shorten => m < n,
            RateMatchMode::Repeat => m > n,
        };
        if !ok {
            return invalid(format!("mode {:?} inconsistent with N={n}, M={m}", self.mode));
        }
        if self.subblock && n % 32 != 0 {
            return invalid(format!("sub-block interleaving needs N divisible by 32, got {n}"));
        }
        Ok(())
    }

    /// Interleaver as a gather map: `out[k] = in[perm[k]]`.
    pub fn permutation(&self) -> Vec<usize> {
        if self.subblock {
            subblock_permutation(self.mother_length).expect("validated length")
        } else {
            (0..self.mother_length).collect()
        }
    }

    /// Mother-codeword index carried by transmitted position `t`.
    pub fn source_index(&self, perm: &[usize], t: usize) -> usize {
        let n = self.mother_length;
        let k = match self.mode {
            RateMatchMode::Puncture => t + (n - self.target_length),
            _ => t % n,
        };
        perm[k]
    }

    /// Mother indices that are never transmitted.
    pub fn removed_indices(&self) -> Vec<usize> {
        let perm = self.permutation();
        let (n, m) = (self.mother_length, self.target_length);
        match self.mode {
            RateMatchMode::Puncture => perm[..n - m].to_vec(),
            RateMatchMode::Shorten => perm[m..].to_vec(),
            _ => Vec::new(),
        }
    }

    /// u-domain indices that must be frozen so shortened bits are always zero:
    /// every index whose row covers a shortened codeword position.
    pub fn forced_frozen(&self) -> Vec<usize> {
        if self.mode != RateMatchMode::Shorten {
            return Vec::new();
        }
        let removed = self.removed_indices();
        (0..self.mother_length)
            .filter(|&v| removed.iter().any(|&x| (x & !v) == 0))
            .collect()
    }
}

/// Gather map of the sub-block interleaver for length `n` (multiple of 32).
pub fn subblock_permutation(n: usize) -> Result<Vec<usize>> {
    if n == 0 || !n.is_multiple_of(32) {
        return invalid(format!("sub-block interleaving needs N divisible by 32, got {n}"));
    }
    let size = n / 32;
    Ok((0..n)
        .map(|k| SUBBLOCK_PATTERN[k / size] * size + k % size)
        .collect())
}

pub fn subblock_interleave<T: Copy>(bits: &[T]) -> Result<Vec<T>> {
    let perm = subblock_permutation(bits.len())?;
    Ok(perm.iter().map(|&p| bits[p]).collect())
}

pub fn subblock_deinterleave<T: Copy + Default>(bits: &[T]) -> Result<Vec<T>> {
    let perm = subblock_permutation(bits.len())?;
    let mut out = vec![T::default(); bits.len()];
    for (k, &p) in perm.iter().enumerate() {
        out[p] = bits[k];
    }
    Ok(out)
}

/// Picks the rate-matching mode for a component of rate `rate` (CRC
/// included) mapping `mother_length` to `target_length` bits.
pub fn select_mode(
    rate: f64,
    target_length: usize,
    mother_length: usize,
    coded_pilot: bool,
) -> RateMatchMode {
    use std::cmp::Ordering::*;
    match target_length.cmp(&mother_length) {
        Greater => RateMatchMode::Repeat,
        Equal => RateMatchMode::None,
        Less if coded_pilot || rate < SHORTEN_THRESHOLD => RateMatchMode::Puncture,
        Less => RateMatchMode::Shorten,
    }
}

/// Mother length for `info_len` decoded bits in `target_length` coded bits.
///
/// Takes the next power of two above `target_length`, dropping to the lower
/// power (repetition) when the target exceeds it by at most 1/8 and the rate
/// is below 9/16. The result always holds `info_len` and is at least
/// `min_length`.
pub fn select_mother_length(target_length: usize, info_len: usize, min_length: usize) -> usize {
    let upper = target_length.max(2).next_power_of_two();
    let lower = upper / 2;
    let mut n = upper;
    if lower >= 2
        && 8 * target_length <= 9 * lower
        && (info_len as f64) / (target_length as f64) < 9.0 / 16.0
    {
        n = lower;
    }
    n.max(info_len.next_power_of_two()).max(min_length.next_power_of_two())
}

/// Maps a mother codeword to the transmitted bit sequence.
pub fn rate_match(codeword: &[u8], spec: &RateMatchSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    if codeword.len() != spec.mother_length {
        return invalid(format!(
            "codeword length {} differs from mother length {}",
            codeword.len(),
            spec.mother_length
        ));
    }
    let perm = spec.permutation();
    Ok((0..spec.target_length)
        .map(|t| codeword[spec.source_index(&perm, t)])
        .collect())
}

/// Inverse of [`rate_match`] on LLRs: punctured positions get 0, shortened
/// positions `+LLR_MAX`, repetitions are summed.
pub fn de_rate_match(llrs: &[f64], spec: &RateMatchSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if llrs.len() != spec.target_length {
        return invalid(format!(
            "expected {} LLRs, got {}",
            spec.target_length,
            llrs.len()
        ));
    }
    let perm = spec.permutation();
    let mut out = vec![0.0; spec.mother_length];
    if spec.mode == RateMatchMode::Shorten {
        for &i in &perm[spec.target_length..] {
            out[i] = LLR_MAX;
        }
    }
    for (t, &l) in llrs.iter().enumerate() {
        out[spec.source_index(&perm, t)] += l;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{encode, sc_decode, PolarCodeSpec};
    use proptest::prelude::*;

    #[test]
    fn pattern_on_ramp() {
        let ramp: Vec<usize> = (0..32).collect();
        assert_eq!(subblock_interleave(&ramp).unwrap(), SUBBLOCK_PATTERN.to_vec());
        assert!(subblock_interleave(&[0u8; 48]).is_err());
    }

    #[test]
    fn subblocks_move_as_units() {
        let ramp: Vec<usize> = (0..64).collect();
        let out = subblock_interleave(&ramp).unwrap();
        for k in 0..32 {
            assert_eq!(out[2 * k], 2 * SUBBLOCK_PATTERN[k]);
            assert_eq!(out[2 * k + 1], 2 * SUBBLOCK_PATTERN[k] + 1);
        }
    }

    #[test]
    fn mode_selection() {
        assert_eq!(select_mode(0.5, 24, 32, false), RateMatchMode::Puncture);
        assert_eq!(select_mode(0.75, 24, 32, false), RateMatchMode::Shorten);
        assert_eq!(select_mode(0.75, 24, 32, true), RateMatchMode::Puncture);
        assert_eq!(select_mode(0.3, 40, 32, true), RateMatchMode::Repeat);
        assert_eq!(select_mode(0.3, 32, 32, false), RateMatchMode::None);
    }

    #[test]
    fn mother_length_rule() {
        assert_eq!(select_mother_length(600, 300, 1), 1024);
        assert_eq!(select_mother_length(568, 300, 1), 512);
        assert_eq!(select_mother_length(568, 400, 1), 1024);
        assert_eq!(select_mother_length(32, 12, 8), 32);
        assert_eq!(select_mother_length(16, 14, 16), 16);
        assert_eq!(select_mother_length(8, 3, 8), 8);
    }

    #[test]
    fn spec_validation() {
        assert!(RateMatchSpec::new(RateMatchMode::None, 32, 30).is_err());
        assert!(RateMatchSpec::new(RateMatchMode::Puncture, 32, 40).is_err());
        assert!(RateMatchSpec::new(RateMatchMode::Repeat, 32, 24).is_err());
        assert!(RateMatchSpec::new(RateMatchMode::Repeat, 48, 50).is_err());
        assert!(RateMatchSpec::for_coded_pilot(RateMatchMode::Shorten, 32, 24).is_err());
        assert!(!RateMatchSpec::for_coded_pilot(RateMatchMode::None, 32, 32).unwrap().subblock);
        assert!(RateMatchSpec::for_coded_pilot(RateMatchMode::None, 64, 64).unwrap().subblock);
    }

    #[test]
    fn rate_match_examples() {
        let ramp: Vec<u8> = (0..32).collect();
        let none = RateMatchSpec::new(RateMatchMode::None, 32, 32).unwrap();
        let inter = subblock_interleave(&ramp).unwrap();
        assert_eq!(rate_match(&ramp, &none).unwrap(), inter);

        let punct = RateMatchSpec::new(RateMatchMode::Puncture, 32, 24).unwrap();
        assert_eq!(rate_match(&ramp, &punct).unwrap(), inter[8..].to_vec());

        let rep = RateMatchSpec::new(RateMatchMode::Repeat, 32, 40).unwrap();
        let mut expect = inter.clone();
        expect.extend_from_slice(&inter[..8]);
        assert_eq!(rate_match(&ramp, &rep).unwrap(), expect);
        assert!(rate_match(&ramp[..16], &rep).is_err());
    }

    #[test]
    fn de_rate_match_examples() {
        let none = RateMatchSpec::new(RateMatchMode::None, 32, 32).unwrap();
        let ramp: Vec<f64> = (0..32).map(f64::from).collect();
        let back = de_rate_match(&subblock_interleave(&ramp).unwrap(), &none).unwrap();
        assert_eq!(back, ramp);

        let short = RateMatchSpec::new(RateMatchMode::Shorten, 32, 24).unwrap();
        let l = de_rate_match(&[1.0; 24], &short).unwrap();
        assert_eq!(l.iter().filter(|&&v| v == LLR_MAX).count(), 8);

        let rep = RateMatchSpec::new(RateMatchMode::Repeat, 32, 40).unwrap();
        let l = de_rate_match(&[1.0; 40], &rep).unwrap();
        assert_eq!(l.iter().filter(|&&v| v == 2.0).count(), 8);
        assert_eq!(l.iter().filter(|&&v| v == 1.0).count(), 24);

        let punct = RateMatchSpec::new(RateMatchMode::Puncture, 32, 24).unwrap();
        let l = de_rate_match(&[1.0; 24], &punct).unwrap();
        assert_eq!(l.iter().filter(|&&v| v == 0.0).count(), 8);
        assert!(de_rate_match(&[1.0; 23], &punct).is_err());
    }

    #[test]
    fn shortened_positions_always_zero() {
        // Exhaustive over all messages on the free positions of N=32.
        for m in [20, 24, 27] {
            let spec = RateMatchSpec::new(RateMatchMode::Shorten, 32, m).unwrap();
            let forced = spec.forced_frozen();
            let removed = spec.removed_indices();
            let free: Vec<usize> = (0..32).filter(|i| !forced.contains(i)).collect();
            // Every free row is zero on the removed positions, so by linearity
            // every codeword is.
            for &v in &free {
                let code = PolarCodeSpec::new(32, vec![v], vec![], 0).unwrap();
                let x = encode(&code, &[1]).unwrap();
                assert!(removed.iter().all(|&r| x[r] == 0), "row {v} leaks into shortened bits");
            }
            assert!(free.len() >= m - 8);
        }
    }

    #[test]
    fn noiseless_end_to_end_all_modes() {
        for (n, m, mode) in [
            (32, 32, RateMatchMode::None),
            (32, 20, RateMatchMode::Puncture),
            (32, 26, RateMatchMode::Shorten),
            (32, 44, RateMatchMode::Repeat),
            (64, 64, RateMatchMode::None),
            (64, 50, RateMatchMode::Puncture),
            (64, 40, RateMatchMode::Shorten),
            (64, 70, RateMatchMode::Repeat),
        ] {
            let rm = RateMatchSpec::new(mode, n, m).unwrap();
            let forced = rm.forced_frozen();
            let removed = rm.removed_indices();
            // Information on the largest indices that are neither forced nor
            // rendered unobservable by puncturing.
            let k = m.min(n) / 2;
            let info: Vec<usize> = (0..n)
                .rev()
                .filter(|i| !forced.contains(i) && !(mode == RateMatchMode::Puncture && removed.contains(i)))
                .take(k)
                .collect();
            let code = PolarCodeSpec::new(n, info, vec![], 0).unwrap();
            for seed in 0..20u64 {
                let msg: Vec<u8> = (0..k).map(|i| ((seed * 7 + i as u64 * 13) % 3 % 2) as u8).collect();
                let x = encode(&code, &msg).unwrap();
                let tx = rate_match(&x, &rm).unwrap();
                let llr: Vec<f64> = tx.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
                let back = de_rate_match(&llr, &rm).unwrap();
                for i in 0..n {
                    if back[i] != 0.0 {
                        assert_eq!(u8::from(back[i] < 0.0), x[i], "{mode:?} position {i}");
                    }
                }
                assert_eq!(sc_decode(&code, &back).unwrap().message, msg, "{mode:?} N={n} M={m}");
            }
        }
    }

    proptest! {
        #[test]
        fn deinterleave_inverts(bits in proptest::collection::vec(0u8..2, 128)) {
            let inter = subblock_interleave(&bits).unwrap();
            prop_assert_eq!(subblock_deinterleave(&inter).unwrap(), bits);
        }
    }
}
