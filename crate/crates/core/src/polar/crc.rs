//! CRC-11 outer code, generator `D^11 + D^10 + D^9 + D^5 + 1`.
//!
//! Bits are processed first-to-last as coefficients of decreasing powers,
//! with a zero initial register.

/// Number of parity bits.
pub const CRC11_LEN: usize = 11;

/// Generator polynomial including the leading `D^11` term.
pub const CRC11_POLY: u32 = 0b1110_0010_0001;

/// Remainder of `bits(D) * D^11` modulo the generator.
pub fn crc_remainder(bits: &[u8]) -> [u8; CRC11_LEN] {
    let mut reg: u32 = 0;
    for &b in bits {
        let top = ((reg >> (CRC11_LEN - 1)) & 1) ^ u32::from(b & 1);
        reg = (reg << 1) & ((1 << CRC11_LEN) - 1);
        if top == 1 {
            reg ^= CRC11_POLY & ((1 << CRC11_LEN) - 1);
        }
    }
    let mut out = [0u8; CRC11_LEN];
    for (i, o) in out.iter_mut().enumerate() {
        *o = ((reg >> (CRC11_LEN - 1 - i)) & 1) as u8;
    }
    out
}

/// Message followed by its 11 parity bits.
pub fn crc_attach(message: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(message.len() + CRC11_LEN);
    out.extend_from_slice(message);
    out.extend_from_slice(&crc_remainder(message));
    out
}

/// True when the trailing 11 bits are the CRC of the preceding bits.
pub fn crc_check(bits: &[u8]) -> bool {
    if bits.len() < CRC11_LEN {
        return false;
    }
    let (msg, parity) = bits.split_at(bits.len() - CRC11_LEN);
    crc_remainder(msg) == parity
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Long division by the generator written out term by term.
    fn remainder_by_division(bits: &[u8]) -> Vec<u8> {
        let poly: Vec<u8> = (0..=CRC11_LEN)
            .map(|i| ((CRC11_POLY >> (CRC11_LEN - i)) & 1) as u8)
            .collect();
        let mut work = bits.to_vec();
        work.extend(std::iter::repeat_n(0, CRC11_LEN));
        for i in 0..bits.len() {
            if work[i] == 1 {
                for (j, &p) in poly.iter().enumerate() {
                    work[i + j] ^= p;
                }
            }
        }
        work[bits.len()..].to_vec()
    }

    #[test]
    fn attach_then_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let len = rng.random_range(1..200);
            let m: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
            let c = crc_attach(&m);
            assert!(crc_check(&c));
            assert_eq!(c[len..].to_vec(), remainder_by_division(&m));
        }
    }

    #[test]
    fn single_flips_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let m: Vec<u8> = (0..60).map(|_| rng.random_range(0..2)).collect();
            let c = crc_attach(&m);
            for pos in 0..c.len() {
                let mut bad = c.clone();
                bad[pos] ^= 1;
                assert!(!crc_check(&bad), "flip at {pos} undetected");
            }
        }
    }

    #[test]
    fn zero_message_zero_parity() {
        let c = crc_attach(&[0; 40]);
        assert!(c.iter().all(|&b| b == 0));
        assert!(!crc_check(&[0; 5]));
    }
}
