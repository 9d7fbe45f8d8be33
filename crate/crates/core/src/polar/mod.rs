//! Polar codes in natural (non bit-reversed) order.
//!
//! Codewords are `x = u F_N` with `F_N` the `n`-fold Kronecker power of the
//! 2x2 kernel `[[1, 0], [1, 1]]`. Row `v` of `F_N` has a one in column `x`
//! exactly when the bits of `x` are a subset of the bits of `v`.

mod crc;
mod sc;
mod scl;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use crc::{crc_attach, crc_check, crc_remainder, CRC11_LEN, CRC11_POLY};
pub use sc::{f_op, g_op, sc_decode, sc_decode_traced, ScOutput};
pub use scl::{scl_candidates, scl_decode, SclCandidate, SclOutput};

/// One polar component code: mother length, information set, monitored
/// frozen positions and CRC length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PolarCodeSpec {
    length: usize,
    info_set: Vec<usize>,
    monitor_set: Vec<usize>,
    crc_length: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    length: usize,
    info_set: Vec<usize>,
    #[serde(default)]
    monitor_set: Vec<usize>,
    #[serde(default)]
    crc_length: usize,
}

impl TryFrom<RawSpec> for PolarCodeSpec {
    type Error = crate::Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        PolarCodeSpec::new(raw.length, raw.info_set, raw.monitor_set, raw.crc_length)
    }
}

impl From<PolarCodeSpec> for RawSpec {
    fn from(s: PolarCodeSpec) -> Self {
        RawSpec {
            length: s.length,
            info_set: s.info_set,
            monitor_set: s.monitor_set,
            crc_length: s.crc_length,
        }
    }
}

impl PolarCodeSpec {
    /// Builds a spec, sorting the index sets and checking every invariant.
    pub fn new(
        length: usize,
        mut info_set: Vec<usize>,
        mut monitor_set: Vec<usize>,
        crc_length: usize,
    ) -> Result<Self> {
        if length < 2 || !length.is_power_of_two() {
            return invalid(format!("mother length {length} is not a power of two >= 2"));
        }
        info_set.sort_unstable();
        monitor_set.sort_unstable();
        if info_set.windows(2).any(|w| w[0] == w[1]) {
            return invalid("duplicate index in information set");
        }
        if info_set.last().is_some_and(|&i| i >= length) {
            return invalid("information index out of range");
        }
        if monitor_set.windows(2).any(|w| w[0] == w[1]) {
            return invalid("duplicate monitor index");
        }
        if monitor_set.iter().any(|&m| m + 2 < length || m >= length) {
            return invalid("monitor positions must be a subset of {N-2, N-1}");
        }
        if monitor_set.iter().any(|m| info_set.binary_search(m).is_ok()) {
            return invalid("monitor positions must be frozen");
        }
        if crc_length != 0 && crc_length != CRC11_LEN {
            return invalid(format!("unsupported CRC length {crc_length}"));
        }
        if crc_length > info_set.len() {
            return invalid("CRC longer than the information set");
        }
        Ok(Self {
            length,
            info_set,
            monitor_set,
            crc_length,
        })
    }

    /// Same code with the monitor positions `{N-2, N-1}` attached.
    pub fn with_monitors(mut self) -> Result<Self> {
        let n = self.length;
        self.monitor_set = vec![n - 2, n - 1];
        Self::new(n, self.info_set, self.monitor_set, self.crc_length)
    }

    pub fn with_crc(self, crc_length: usize) -> Result<Self> {
        Self::new(self.length, self.info_set, self.monitor_set, crc_length)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn log_length(&self) -> u32 {
        self.length.trailing_zeros()
    }

    /// Information set in ascending order.
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn monitor_set(&self) -> &[usize] {
        &self.monitor_set
    }

    pub fn crc_length(&self) -> usize {
        self.crc_length
    }

    /// Number of information bits carried, CRC included.
    pub fn info_len(&self) -> usize {
        self.info_set.len()
    }

    pub fn frozen_set(&self) -> Vec<usize> {
        let mask = self.info_mask();
        (0..self.length).filter(|&i| !mask[i]).collect()
    }

    pub fn info_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.length];
        for &i in &self.info_set {
            mask[i] = true;
        }
        mask
    }

    /// Positions decided by the decoders: information plus monitor bits.
    pub fn decoded_mask(&self) -> Vec<bool> {
        let mut mask = self.info_mask();
        for &i in &self.monitor_set {
            mask[i] = true;
        }
        mask
    }

    /// Reads the information bits out of a u-domain vector.
    pub fn extract_info(&self, u: &[u8]) -> Vec<u8> {
        self.info_set.iter().map(|&i| u[i]).collect()
    }
}

/// Applies `x = u F_N` in place. The length must be a power of two.
pub fn transform_in_place(bits: &mut [u8]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in bits.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

/// Polar transform `u F_N` over GF(2). The transform is its own inverse.
pub fn polar_transform(u: &[u8]) -> Result<Vec<u8>> {
    if u.is_empty() || !u.len().is_power_of_two() {
        return invalid(format!("transform length {} is not a power of two", u.len()));
    }
    let mut x = u.to_vec();
    transform_in_place(&mut x);
    Ok(x)
}

/// Codeword index handled by processing element `(j, k)` at level `d` of an
/// `N = 2^n` transform, `k` in `{1, 2}` selecting the upper or lower input.
///
/// Level `d < n` pairs indices `2^(n-d-1)` apart. At the decision level
/// `d = n` the formula's limit `2j + k - 1` is used.
pub fn alpha_map(d: u32, j: usize, k: u8, n: u32) -> Result<usize> {
    if n == 0 || n >= usize::BITS {
        return invalid(format!("log length {n} out of range"));
    }
    if d > n {
        return invalid(format!("level {d} exceeds {n}"));
    }
    if j >= 1usize << (n - 1) {
        return invalid(format!("element index {j} out of range"));
    }
    if k != 1 && k != 2 {
        return invalid(format!("element port {k} must be 1 or 2"));
    }
    let lower = usize::from(k - 1);
    if d == n {
        return Ok(2 * j + lower);
    }
    let span = 1usize << (n - d - 1);
    let group = j / span;
    Ok(group * 2 * span + (j - group * span) + lower * span)
}

/// Places `message` on the information set (zeros elsewhere, monitor
/// positions included) and applies the polar transform.
pub fn encode(spec: &PolarCodeSpec, message: &[u8]) -> Result<Vec<u8>> {
    if message.len() != spec.info_len() {
        return invalid(format!(
            "message has {} bits, code carries {}",
            message.len(),
            spec.info_len()
        ));
    }
    let mut u = vec![0u8; spec.length()];
    for (&i, &b) in spec.info_set().iter().zip(message) {
        u[i] = b & 1;
    }
    transform_in_place(&mut u);
    Ok(u)
}
