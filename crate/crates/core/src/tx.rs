//! Transmitters: the code-splitting packet builder and the pilot-aided
//! baseline.
//!
//! A split packet over `B` fading blocks carries one QAM data component
//! (index 0) and one QPSK coded-pilot component per block (indices `1..=B`).
//! Block `b` is emitted as `[x_b, x_{0,b}]`: the coded pilot first, followed
//! by that block's share of the data symbols.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::channel::{trial_rng, Stream};
use crate::error::{bad_config, invalid, Result};
use crate::modem::{map_symbols, BicmInterleaver, Constellation};
use crate::polar::{crc_attach, crc_remainder, encode, PolarCodeSpec, CRC11_LEN};
use crate::rate_match::{rate_match, RateMatchMode, RateMatchSpec};

/// Smallest coded-pilot mother length: two monitor bits plus room for data.
pub const MIN_PILOT_MOTHER_LENGTH: usize = 8;

/// Where the CRC-11 parity lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CrcPolicy {
    /// Every component carries the CRC of its own sub-message.
    #[default]
    #[serde(rename = "per-component")]
    PerComponent,
    /// One CRC over the whole message, carried by the data component.
    #[serde(rename = "aggregate-on-0")]
    AggregateOnZero,
}

impl CrcPolicy {
    /// CRC bits carried by component `b`.
    pub fn crc_bits(self, b: usize) -> usize {
        match self {
            CrcPolicy::PerComponent => CRC11_LEN,
            CrcPolicy::AggregateOnZero if b == 0 => CRC11_LEN,
            CrcPolicy::AggregateOnZero => 0,
        }
    }
}

/// A polar code together with its rate matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCode {
    pub code: PolarCodeSpec,
    pub rate_match: RateMatchSpec,
}

impl ComponentCode {
    /// Polar-encodes and rate-matches one information word.
    pub fn encode_bits(&self, info: &[u8]) -> Result<Vec<u8>> {
        rate_match(&encode(&self.code, info)?, &self.rate_match)
    }
}

/// Symbol ranges of one fading block within the packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSlot {
    pub pilot: Range<usize>,
    pub data: Range<usize>,
    /// The same data symbols as indices into the data component.
    pub data_component: Range<usize>,
}

/// Code-splitting transmission scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Channel uses per fading block.
    pub block_lengths: Vec<usize>,
    /// Coded-pilot symbols per block, `N_c^b` for `b = 1..=B`.
    pub pilot_symbols: Vec<usize>,
    /// Information bits per component before CRC, `K_0..=K_B`.
    pub info_bits: Vec<usize>,
    /// QAM order of the data component.
    pub modulation: usize,
    #[serde(default)]
    pub crc_policy: CrcPolicy,
    /// BICM interleaver seed for the data component; `None` is the identity.
    pub bicm_seed: Option<u64>,
    /// Component codes, data component first.
    pub components: Vec<ComponentCode>,
}

impl SplitConfig {
    pub fn blocks(&self) -> usize {
        self.block_lengths.len()
    }

    /// `N_t`.
    pub fn total_symbols(&self) -> usize {
        self.block_lengths.iter().sum()
    }

    /// `N_c^0`.
    pub fn data_symbols(&self) -> usize {
        self.total_symbols() - self.pilot_symbols.iter().sum::<usize>()
    }

    pub fn data_symbols_per_block(&self) -> Vec<usize> {
        self.block_lengths
            .iter()
            .zip(&self.pilot_symbols)
            .map(|(l, p)| l - p)
            .collect()
    }

    /// `K`.
    pub fn message_len(&self) -> usize {
        self.info_bits.iter().sum()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.trailing_zeros() as usize
    }

    /// Coded bits `M_b` per component.
    pub fn coded_lengths(&self) -> Vec<usize> {
        std::iter::once(self.bits_per_symbol() * self.data_symbols())
            .chain(self.pilot_symbols.iter().map(|&p| 2 * p))
            .collect()
    }

    /// Bits placed on component `b`'s information set (`K_b` plus CRC).
    pub fn component_info_len(&self, b: usize) -> usize {
        self.info_bits[b] + self.crc_policy.crc_bits(b)
    }

    /// Symbols per component, `N_c^0..=N_c^B`.
    pub fn component_symbols(&self) -> Vec<usize> {
        std::iter::once(self.data_symbols())
            .chain(self.pilot_symbols.iter().copied())
            .collect()
    }

    pub fn effective_rate(&self) -> f64 {
        effective_rate(&self.component_symbols(), &self.info_bits, self.bits_per_symbol())
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::new(self.modulation)
    }

    pub fn bicm(&self) -> BicmInterleaver {
        BicmInterleaver::from_seed(self.coded_lengths()[0], self.bicm_seed)
    }

    pub fn layout(&self) -> Vec<BlockSlot> {
        let mut slots = Vec::with_capacity(self.blocks());
        let (mut pos, mut data_pos) = (0, 0);
        for (&len, &pilot) in self.block_lengths.iter().zip(&self.pilot_symbols) {
            let data = len - pilot;
            slots.push(BlockSlot {
                pilot: pos..pos + pilot,
                data: pos + pilot..pos + len,
                data_component: data_pos..data_pos + data,
            });
            pos += len;
            data_pos += data;
        }
        slots
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.blocks();
        if b == 0 {
            return bad_config("at least one fading block is required");
        }
        if self.pilot_symbols.len() != b {
            return bad_config("need one coded-pilot size per block");
        }
        if self.info_bits.len() != b + 1 || self.components.len() != b + 1 {
            return bad_config("need B + 1 components");
        }
        if Constellation::new(self.modulation).is_err() {
            return bad_config(format!("unsupported modulation order {}", self.modulation));
        }
        for (i, (&len, &p)) in self.block_lengths.iter().zip(&self.pilot_symbols).enumerate() {
            if p == 0 || p > len {
                return bad_config(format!("block {i}: {p} pilot symbols in a block of {len}"));
            }
        }
        if self.data_symbols() == 0 {
            return bad_config("the data component has no symbols");
        }
        let coded = self.coded_lengths();
        for (i, cc) in self.components.iter().enumerate() {
            let code = &cc.code;
            let rm = &cc.rate_match;
            rm.validate()?;
            if rm.mother_length != code.length() {
                return bad_config(format!("component {i}: rate matching and code lengths differ"));
            }
            if rm.target_length != coded[i] {
                return bad_config(format!(
                    "component {i}: rate matching targets {} bits, layout needs {}",
                    rm.target_length, coded[i]
                ));
            }
            if code.info_len() != self.component_info_len(i) {
                return bad_config(format!(
                    "component {i}: code carries {} bits, expected {}",
                    code.info_len(),
                    self.component_info_len(i)
                ));
            }
            if code.crc_length() != self.crc_policy.crc_bits(i) {
                return bad_config(format!("component {i}: CRC length does not match the policy"));
            }
            let forced = rm.forced_frozen();
            if code.info_set().iter().any(|i| forced.contains(i)) {
                return bad_config(format!("component {i}: information on a shortened position"));
            }
            if i == 0 {
                if !code.monitor_set().is_empty() {
                    return bad_config("the data component has no monitor bits");
                }
                continue;
            }
            let n = code.length();
            if n < MIN_PILOT_MOTHER_LENGTH {
                return bad_config(format!("component {i}: coded-pilot mother length {n} below 8"));
            }
            if code.monitor_set() != [n - 2, n - 1] {
                return bad_config(format!("component {i}: coded pilots must monitor N-2 and N-1"));
            }
            if rm.mode == RateMatchMode::Shorten {
                return bad_config(format!("component {i}: coded pilots cannot be shortened"));
            }
            if rm.subblock && n < 64 {
                return bad_config(format!(
                    "component {i}: sub-block interleaving splits QPSK pairs below N=64"
                ));
            }
            if !crate::blind::rotation_compatible(code) {
                return bad_config(format!(
                    "component {i}: a frozen odd index follows an information bit"
                ));
            }
            if self.info_bits[i] == 0 {
                return bad_config(format!("component {i}: coded pilots need K_b >= 1"));
            }
        }
        Ok(())
    }
}

/// `n_s a_0 R_0 + sum_b 2 a_b R_b` with `a_b = N_c^b / N_t`, `R_b = K_b / M_b`.
pub fn effective_rate(symbols: &[usize], info_bits: &[usize], bits_per_symbol: usize) -> f64 {
    let total: usize = symbols.iter().sum();
    let mut rate = 0.0;
    for (b, (&s, &k)) in symbols.iter().zip(info_bits).enumerate() {
        if s == 0 {
            continue;
        }
        let bits = if b == 0 { bits_per_symbol } else { 2 };
        let alpha = s as f64 / total as f64;
        rate += bits as f64 * alpha * (k as f64 / (bits * s) as f64);
    }
    rate
}

/// Splits the message into sub-messages and attaches CRCs per the policy.
pub fn component_infos(message: &[u8], cfg: &SplitConfig) -> Result<Vec<Vec<u8>>> {
    if message.len() != cfg.message_len() {
        return invalid(format!(
            "message has {} bits, configuration carries {}",
            message.len(),
            cfg.message_len()
        ));
    }
    let mut out = Vec::with_capacity(cfg.info_bits.len());
    let mut pos = 0;
    for &k in &cfg.info_bits {
        out.push(message[pos..pos + k].to_vec());
        pos += k;
    }
    match cfg.crc_policy {
        CrcPolicy::PerComponent => Ok(out.iter().map(|m| crc_attach(m)).collect()),
        CrcPolicy::AggregateOnZero => {
            out[0].extend_from_slice(&crc_remainder(message));
            Ok(out)
        }
    }
}

/// Builds the `N_t`-symbol packet `[x_1, x_{0,1}, ..., x_B, x_{0,B}]`.
pub fn encode_packet(message: &[u8], cfg: &SplitConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let infos = component_infos(message, cfg)?;
    let qam = cfg.constellation()?;
    let qpsk = Constellation::new(4)?;
    let data_bits = cfg.components[0].encode_bits(&infos[0])?;
    let data = map_symbols(&cfg.bicm().interleave(&data_bits), &qam)?;
    let mut x = vec![Complex64::new(0.0, 0.0); cfg.total_symbols()];
    for (b, slot) in cfg.layout().iter().enumerate() {
        let pilot_bits = cfg.components[b + 1].encode_bits(&infos[b + 1])?;
        let pilot = map_symbols(&pilot_bits, &qpsk)?;
        x[slot.pilot.clone()].copy_from_slice(&pilot);
        x[slot.data.clone()].copy_from_slice(&data[slot.data_component.clone()]);
    }
    Ok(x)
}

/// Conventional scheme: known QPSK pilots ahead of each block's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotAidedConfig {
    pub block_lengths: Vec<usize>,
    /// `N_p^(b)` per block.
    pub pilot_lengths: Vec<usize>,
    pub modulation: usize,
    /// `K`, before CRC.
    pub info_bits: usize,
    /// Data code; carries `K + 11` bits.
    pub code: ComponentCode,
    pub pilot_seed: u64,
    pub bicm_seed: Option<u64>,
}

impl PilotAidedConfig {
    pub fn blocks(&self) -> usize {
        self.block_lengths.len()
    }

    pub fn total_symbols(&self) -> usize {
        self.block_lengths.iter().sum()
    }

    /// `N_d`.
    pub fn data_symbols(&self) -> usize {
        self.total_symbols() - self.pilot_lengths.iter().sum::<usize>()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.trailing_zeros() as usize
    }

    pub fn coded_length(&self) -> usize {
        self.bits_per_symbol() * self.data_symbols()
    }

    /// `(1 - alpha) n_s R` with `alpha = sum N_p / N_t` and `R = K / M`.
    pub fn effective_rate(&self) -> f64 {
        let alpha = 1.0 - self.data_symbols() as f64 / self.total_symbols() as f64;
        let rate = self.info_bits as f64 / self.coded_length() as f64;
        (1.0 - alpha) * self.bits_per_symbol() as f64 * rate
    }

    pub fn bicm(&self) -> BicmInterleaver {
        BicmInterleaver::from_seed(self.coded_length(), self.bicm_seed)
    }

    pub fn layout(&self) -> Vec<BlockSlot> {
        let mut slots = Vec::with_capacity(self.blocks());
        let (mut pos, mut data_pos) = (0, 0);
        for (&len, &pilot) in self.block_lengths.iter().zip(&self.pilot_lengths) {
            let data = len - pilot;
            slots.push(BlockSlot {
                pilot: pos..pos + pilot,
                data: pos + pilot..pos + len,
                data_component: data_pos..data_pos + data,
            });
            pos += len;
            data_pos += data;
        }
        slots
    }

    /// Known pilot symbols of block `b`.
    pub fn pilot_sequence(&self, b: usize) -> Vec<Complex64> {
        let qpsk = Constellation::new(4).expect("QPSK");
        let mut rng = trial_rng(self.pilot_seed, b as u64, Stream::Aux);
        (0..self.pilot_lengths[b])
            .map(|_| qpsk.points()[rng.random_range(0..4u32) as usize])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks() == 0 || self.pilot_lengths.len() != self.blocks() {
            return bad_config("need one pilot length per block and at least one block");
        }
        if Constellation::new(self.modulation).is_err() {
            return bad_config(format!("unsupported modulation order {}", self.modulation));
        }
        if self.pilot_lengths.iter().zip(&self.block_lengths).any(|(p, l)| p > l) {
            return bad_config("pilots longer than their block");
        }
        if self.data_symbols() == 0 {
            return bad_config("no data symbols");
        }
        let rm = &self.code.rate_match;
        rm.validate()?;
        if rm.mother_length != self.code.code.length() || rm.target_length != self.coded_length() {
            return bad_config("rate matching inconsistent with the layout");
        }
        if self.code.code.info_len() != self.info_bits + CRC11_LEN
            || self.code.code.crc_length() != CRC11_LEN
        {
            return bad_config("the data code must carry K + 11 bits with CRC-11");
        }
        let forced = rm.forced_frozen();
        if self.code.code.info_set().iter().any(|i| forced.contains(i)) {
            return bad_config("information on a shortened position");
        }
        Ok(())
    }
}

/// Builds `[p_1, d_1, p_2, d_2, ...]`.
pub fn pilot_aided_encode(message: &[u8], cfg: &PilotAidedConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if message.len() != cfg.info_bits {
        return invalid(format!(
            "message has {} bits, configuration carries {}",
            message.len(),
            cfg.info_bits
        ));
    }
    let qam = Constellation::new(cfg.modulation)?;
    let bits = cfg.code.encode_bits(&crc_attach(message))?;
    let data = map_symbols(&cfg.bicm().interleave(&bits), &qam)?;
    let mut x = vec![Complex64::new(0.0, 0.0); cfg.total_symbols()];
    for (b, slot) in cfg.layout().iter().enumerate() {
        x[slot.pilot.clone()].copy_from_slice(&cfg.pilot_sequence(b));
        x[slot.data.clone()].copy_from_slice(&data[slot.data_component.clone()]);
    }
    Ok(x)
}
