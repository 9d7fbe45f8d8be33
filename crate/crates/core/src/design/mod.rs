//! Code design: equivalent bit channels, density evolution, and the search
//! over information-bit splits.
//!
//! Every component is designed at a common SNR. Coded pilots see QPSK with
//! known-channel means `2 / sigma^2`; the data component sees the BICM bit
//! channels at `sigma^2 + sigma^2 / N_c^b`, block by block, so the implicit
//! pilot quality enters through the effective noise.

mod dega;
mod mi;

pub use dega::{
    bit_error, check_mean, construct_code, dega_block_error, dega_evolve, error_by_size,
    mother_means, overall_error, psi, psi_inv, psi_tail, psi_tail_inv, q_function,
    reliability_order, PSI_BRANCH_SWITCH,
};
pub use mi::{
    bicm_bit_mi, bicm_losses, biawgn_loss, biawgn_mi, match_equivalent_snr, match_loss,
    symbol_mi, BitLevelProfile, PANEL_NODES, PANEL_WIDTH, RANGE_SIGMAS,
};

use serde::{Deserialize, Serialize};
use std::collections::hash_map::Entry;
use std::collections::HashMap;

use crate::channel::noise_variance;
use crate::error::{invalid, Result};
use crate::modem::{BicmInterleaver, Constellation};
use crate::polar::CRC11_LEN;
use crate::rate_match::{select_mode, select_mother_length, RateMatchMode, RateMatchSpec};
use crate::tx::{
    ComponentCode, CrcPolicy, PilotAidedConfig, SplitConfig, MIN_PILOT_MOTHER_LENGTH,
};

pub const DEFAULT_SNR_STEP_DB: f64 = 0.25;
pub const DEFAULT_TARGET_BLER: f64 = 1e-2;
/// Largest number of fading blocks the split search enumerates.
pub const MAX_SEARCH_BLOCKS: usize = 3;

/// Inclusive SNR sweep in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    #[serde(default = "default_step")]
    pub step_db: f64,
}

fn default_step() -> f64 {
    DEFAULT_SNR_STEP_DB
}

impl Default for SnrGrid {
    fn default() -> Self {
        Self {
            start_db: -10.0,
            stop_db: 40.0,
            step_db: DEFAULT_SNR_STEP_DB,
        }
    }
}

impl SnrGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.step_db.is_nan() || self.step_db <= 0.0 || self.stop_db < self.start_db {
            return vec![self.start_db];
        }
        let n = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.start_db + i as f64 * self.step_db) * 1e9).round() / 1e9)
            .collect()
    }
}

/// Inputs of the split search: everything but the information split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRequest {
    pub block_lengths: Vec<usize>,
    pub pilot_symbols: Vec<usize>,
    /// `K`, before CRC.
    pub message_bits: usize,
    pub modulation: usize,
    #[serde(default)]
    pub crc_policy: CrcPolicy,
    pub bicm_seed: Option<u64>,
}

impl SplitRequest {
    fn skeleton(&self) -> SplitConfig {
        let mut info_bits = vec![0; self.block_lengths.len() + 1];
        info_bits[0] = self.message_bits;
        SplitConfig {
            block_lengths: self.block_lengths.clone(),
            pilot_symbols: self.pilot_symbols.clone(),
            info_bits,
            modulation: self.modulation,
            crc_policy: self.crc_policy,
            bicm_seed: self.bicm_seed,
            components: Vec::new(),
        }
    }
}

/// Outcome of [`optimize_split`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDesign {
    pub config: SplitConfig,
    pub design_snr_db: f64,
    /// Predicted error per component, data component first.
    pub component_errors: Vec<f64>,
    pub predicted_bler: f64,
    pub target_met: bool,
}

impl SplitDesign {
    /// Component code rates `K_b' / M_b`, CRC bits included.
    pub fn rates(&self) -> Vec<f64> {
        self.config
            .coded_lengths()
            .iter()
            .enumerate()
            .map(|(b, &m)| self.config.component_info_len(b) as f64 / m as f64)
            .collect()
    }

    /// `R_1 / R_0`.
    pub fn rate_ratio(&self) -> f64 {
        let r = self.rates();
        r[1] / r[0]
    }
}

/// Rate matching chosen for `info_len` bits in `target` coded bits.
pub fn component_rate_match(info_len: usize, target: usize, pilot: bool) -> Result<RateMatchSpec> {
    let (reserved, min) = if pilot {
        (2, MIN_PILOT_MOTHER_LENGTH)
    } else {
        (0, 2)
    };
    let n = select_mother_length(target, info_len + reserved, min);
    let mode = select_mode(info_len as f64 / target as f64, target, n, pilot);
    if pilot {
        RateMatchSpec::for_coded_pilot(mode, n, target)
    } else {
        RateMatchSpec::new(mode, n, target)
    }
}

/// Transmitted-bit means of a data component: bit `j` of the interleaved
/// stream rides level `j % n_s` of symbol `j / n_s`.
pub fn data_transmitted_means(
    c: &Constellation,
    symbols_per_block: &[usize],
    block_sigma2: &[f64],
    bicm: &BicmInterleaver,
) -> Result<Vec<f64>> {
    let n_s = c.bits_per_symbol();
    let total: usize = symbols_per_block.iter().sum();
    if bicm.len() != n_s * total || block_sigma2.len() != symbols_per_block.len() {
        return invalid("layout and interleaver disagree");
    }
    let mut level_means = Vec::with_capacity(total);
    for (&count, &s2) in symbols_per_block.iter().zip(block_sigma2) {
        let profile = BitLevelProfile::new(c, s2)?;
        let means: Vec<f64> = (0..n_s).map(|k| profile.mean(k)).collect();
        level_means.extend(std::iter::repeat_n(means, count));
    }
    let mut out = vec![0.0; bicm.len()];
    for (j, &t) in bicm.permutation().iter().enumerate() {
        out[t] = level_means[j / n_s][j % n_s];
    }
    Ok(out)
}

/// Effective data-component noise per block at `sigma2`.
fn data_block_sigma2(cfg: &SplitConfig, sigma2: f64) -> Vec<f64> {
    cfg.pilot_symbols
        .iter()
        .map(|&p| sigma2 + sigma2 / p as f64)
        .collect()
}

/// Transmitted-bit means of every component of a split layout.
fn split_transmitted_means(cfg: &SplitConfig, sigma2: f64) -> Result<Vec<Vec<f64>>> {
    let c = cfg.constellation()?;
    let mut out = vec![data_transmitted_means(
        &c,
        &cfg.data_symbols_per_block(),
        &data_block_sigma2(cfg, sigma2),
        &cfg.bicm(),
    )?];
    for &p in &cfg.pilot_symbols {
        out.push(vec![2.0 / sigma2; 2 * p]);
    }
    Ok(out)
}

/// Predicted error per component of a fixed configuration at `snr_db`.
pub fn predict_split(cfg: &SplitConfig, snr_db: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let sigma2 = noise_variance(snr_db);
    split_transmitted_means(cfg, sigma2)?
        .iter()
        .zip(&cfg.components)
        .map(|(tx, cc)| {
            let mu = dega_evolve(&mother_means(&cc.rate_match, tx)?)?;
            dega_block_error(&cc.code, &mu)
        })
        .collect()
}

/// Predicted BLER of a pilot-aided configuration at `snr_db`.
pub fn predict_pilot_aided(cfg: &PilotAidedConfig, snr_db: f64) -> Result<f64> {
    cfg.validate()?;
    let sigma2 = noise_variance(snr_db);
    let tx = pilot_aided_means(cfg, sigma2)?;
    let mu = dega_evolve(&mother_means(&cfg.code.rate_match, &tx)?)?;
    dega_block_error(&cfg.code.code, &mu)
}

fn pilot_aided_means(cfg: &PilotAidedConfig, sigma2: f64) -> Result<Vec<f64>> {
    let c = Constellation::new(cfg.modulation)?;
    let data: Vec<usize> = cfg
        .block_lengths
        .iter()
        .zip(&cfg.pilot_lengths)
        .map(|(l, p)| l - p)
        .collect();
    let s2: Vec<f64> = cfg
        .pilot_lengths
        .iter()
        .map(|&p| if p == 0 { sigma2 } else { sigma2 + sigma2 / p as f64 })
        .collect();
    data_transmitted_means(&c, &data, &s2, &cfg.bicm())
}

/// Per-component table of predicted error versus carried bits at one SNR.
struct ComponentTable {
    /// `errors[k']` for `k'` carried bits; `None` when infeasible.
    errors: Vec<Option<f64>>,
}

impl ComponentTable {
    fn build(tx_means: &[f64], pilot: bool, max_len: usize) -> Result<Self> {
        let target = tx_means.len();
        let mut cache: HashMap<(usize, RateMatchMode), (Vec<f64>, Vec<usize>)> = HashMap::new();
        let mut errors = vec![None; max_len + 1];
        for (k, slot) in errors.iter_mut().enumerate() {
            if k > target {
                break;
            }
            let Ok(rm) = component_rate_match(k, target, pilot) else {
                continue;
            };
            let key = (rm.mother_length, rm.mode);
            let (mu, order) = match cache.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let mu = dega_evolve(&mother_means(&rm, tx_means)?)?;
                    let order = reliability_order(&mu, pilot, &rm.forced_frozen());
                    e.insert((mu, order))
                }
            };
            if k > order.len() {
                continue;
            }
            let n = rm.mother_length;
            let monitors = if pilot { vec![n - 2, n - 1] } else { Vec::new() };
            *slot = Some(error_by_size(mu, &order[..k], &monitors)[k]);
        }
        Ok(Self { errors })
    }

    fn get(&self, k: usize) -> Option<f64> {
        self.errors.get(k).copied().flatten()
    }
}

/// Builds the component codes of a split at a given SNR.
fn build_split(
    base: &SplitConfig,
    info_bits: &[usize],
    tx_means: &[Vec<f64>],
) -> Result<SplitConfig> {
    let mut cfg = base.clone();
    cfg.info_bits = info_bits.to_vec();
    cfg.components = Vec::with_capacity(info_bits.len());
    for (b, tx) in tx_means.iter().enumerate() {
        let pilot = b > 0;
        let k = cfg.component_info_len(b);
        let rm = component_rate_match(k, tx.len(), pilot)?;
        let mu = dega_evolve(&mother_means(&rm, tx)?)?;
        let code = construct_code(&mu, k, pilot, &rm.forced_frozen(), cfg.crc_policy.crc_bits(b))?;
        cfg.components.push(ComponentCode { code, rate_match: rm });
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `(overall error, info bits per component, component errors)`.
type BestSplit = (f64, Vec<usize>, Vec<f64>);

/// Best split at one SNR.
fn best_split_at(
    base: &SplitConfig,
    message_bits: usize,
    tx_means: &[Vec<f64>],
) -> Result<Option<BestSplit>> {
    let policy = base.crc_policy;
    let blocks = tx_means.len() - 1;
    let max_len = message_bits + CRC11_LEN;
    let tables: Vec<ComponentTable> = tx_means
        .iter()
        .enumerate()
        .map(|(b, tx)| ComponentTable::build(tx, b > 0, max_len.min(tx.len())))
        .collect::<Result<_>>()?;
    // Candidate payload sizes per coded pilot.
    let pilot_choices: Vec<Vec<(usize, f64)>> = (1..=blocks)
        .map(|b| {
            let crc = policy.crc_bits(b);
            (1..=message_bits)
                .filter_map(|k| tables[b].get(k + crc).map(|p| (k, p)))
                .collect()
        })
        .collect();
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut pick = vec![0usize; blocks];
    if pilot_choices.iter().any(|c| c.is_empty()) {
        return Ok(None);
    }
    loop {
        let pilot_bits: usize = pick.iter().enumerate().map(|(b, &i)| pilot_choices[b][i].0).sum();
        if pilot_bits <= message_bits {
            let k0 = message_bits - pilot_bits;
            if let Some(p0) = tables[0].get(k0 + policy.crc_bits(0)) {
                let mut errs = vec![p0];
                errs.extend(pick.iter().enumerate().map(|(b, &i)| pilot_choices[b][i].1));
                let total = overall_error(&errs)?;
                let mut split = vec![k0];
                split.extend(pick.iter().enumerate().map(|(b, &i)| pilot_choices[b][i].0));
                let better = match &best {
                    None => true,
                    Some((e, s, _)) => total < *e || (total == *e && split < *s),
                };
                if better {
                    best = Some((total, split, errs));
                }
            }
        }
        // Odometer over the pilot choices.
        let mut b = 0;
        loop {
            if b == blocks {
                return Ok(best);
            }
            pick[b] += 1;
            if pick[b] < pilot_choices[b].len() {
                break;
            }
            pick[b] = 0;
            b += 1;
        }
    }
}

/// Searches information splits over an ascending SNR grid and stops at the
/// first SNR whose best split meets `target_bler`.
pub fn optimize_split(req: &SplitRequest, target_bler: f64, grid: &SnrGrid) -> Result<SplitDesign> {
    let blocks = req.block_lengths.len();
    if blocks == 0 || blocks > MAX_SEARCH_BLOCKS {
        return invalid(format!("split search supports 1 to {MAX_SEARCH_BLOCKS} blocks"));
    }
    if req.pilot_symbols.len() != blocks {
        return invalid("need one coded-pilot size per block");
    }
    if req.pilot_symbols.iter().zip(&req.block_lengths).any(|(&p, &l)| p == 0 || p >= l) {
        return invalid("coded pilots must be non-empty and leave room for data");
    }
    Constellation::new(req.modulation)?;
    let base = req.skeleton();
    let points = grid.points();
    let eval = |snr: f64| -> Result<Option<BestSplit>> {
        let tx = split_transmitted_means(&base, noise_variance(snr))?;
        best_split_at(&base, req.message_bits, &tx)
    };
    let meets = |r: &Option<BestSplit>| r.as_ref().is_some_and(|b| b.0 <= target_bler);
    // The minimized error does not increase with SNR, so the first grid
    // point meeting the target is found by bisection.
    let last = eval(points[points.len() - 1])?;
    let (snr, found, met) = if meets(&last) {
        let (mut lo, mut hi) = (0usize, points.len() - 1);
        let mut at_hi = last;
        let first = eval(points[0])?;
        if meets(&first) {
            (points[0], first, true)
        } else {
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                let r = eval(points[mid])?;
                if meets(&r) {
                    hi = mid;
                    at_hi = r;
                } else {
                    lo = mid;
                }
            }
            (points[hi], at_hi, true)
        }
    } else {
        (points[points.len() - 1], last, false)
    };
    let Some((err, split, errs)) = found else {
        return invalid("no feasible split for this budget");
    };
    let tx = split_transmitted_means(&base, noise_variance(snr))?;
    Ok(SplitDesign {
        config: build_split(&base, &split, &tx)?,
        design_snr_db: snr,
        component_errors: errs,
        predicted_bler: err,
        target_met: met,
    })
}

/// Designs splits for several equal per-block coded-pilot sizes and keeps
/// the one with the lowest design SNR (ties: fewer pilot symbols).
pub fn optimize_split_with_pilots(
    req: &SplitRequest,
    candidates: &[usize],
    target_bler: f64,
    grid: &SnrGrid,
) -> Result<SplitDesign> {
    let mut best: Option<SplitDesign> = None;
    for &p in candidates {
        let mut r = req.clone();
        r.pilot_symbols = vec![p; req.block_lengths.len()];
        let Ok(d) = optimize_split(&r, target_bler, grid) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => {
                (d.target_met && !b.target_met)
                    || (d.target_met == b.target_met && d.design_snr_db < b.design_snr_db)
            }
        };
        if better {
            best = Some(d);
        }
    }
    best.ok_or_else(|| crate::Error::InvalidArgument("no feasible coded-pilot size".into()))
}

/// Inputs of the pilot-aided design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotAidedRequest {
    pub block_lengths: Vec<usize>,
    pub pilot_lengths: Vec<usize>,
    pub message_bits: usize,
    pub modulation: usize,
    pub bicm_seed: Option<u64>,
    pub pilot_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotAidedDesign {
    pub config: PilotAidedConfig,
    pub design_snr_db: f64,
    pub predicted_bler: f64,
    pub target_met: bool,
}

fn build_pilot_aided(req: &PilotAidedRequest, sigma2: f64) -> Result<(PilotAidedConfig, f64)> {
    let n_s = Constellation::new(req.modulation)?.bits_per_symbol();
    let data: usize = req.block_lengths.iter().sum::<usize>() - req.pilot_lengths.iter().sum::<usize>();
    let k = req.message_bits + CRC11_LEN;
    let rm = component_rate_match(k, n_s * data, false)?;
    let mut cfg = PilotAidedConfig {
        block_lengths: req.block_lengths.clone(),
        pilot_lengths: req.pilot_lengths.clone(),
        modulation: req.modulation,
        info_bits: req.message_bits,
        code: ComponentCode {
            code: crate::polar::PolarCodeSpec::new(rm.mother_length, Vec::new(), Vec::new(), 0)?,
            rate_match: rm.clone(),
        },
        pilot_seed: req.pilot_seed,
        bicm_seed: req.bicm_seed,
    };
    let tx = pilot_aided_means(&cfg, sigma2)?;
    let mu = dega_evolve(&mother_means(&rm, &tx)?)?;
    cfg.code.code = construct_code(&mu, k, false, &rm.forced_frozen(), CRC11_LEN)?;
    cfg.validate()?;
    let p = dega_block_error(&cfg.code.code, &mu)?;
    Ok((cfg, p))
}

/// Designs the single data code of a pilot-aided packet at the first grid
/// SNR meeting `target_bler`.
pub fn design_pilot_aided(
    req: &PilotAidedRequest,
    target_bler: f64,
    grid: &SnrGrid,
) -> Result<PilotAidedDesign> {
    if req.block_lengths.is_empty() || req.pilot_lengths.len() != req.block_lengths.len() {
        return invalid("need one pilot length per block");
    }
    if req.pilot_lengths.iter().zip(&req.block_lengths).any(|(p, l)| p >= l) {
        return invalid("pilots must leave room for data");
    }
    let points = grid.points();
    let eval = |snr: f64| build_pilot_aided(req, noise_variance(snr)).ok();
    let meets = |r: &Option<(PilotAidedConfig, f64)>| r.as_ref().is_some_and(|b| b.1 <= target_bler);
    let last = eval(points[points.len() - 1]);
    let (snr, found, met) = if meets(&last) {
        let first = eval(points[0]);
        if meets(&first) {
            (points[0], first, true)
        } else {
            let (mut lo, mut hi, mut at_hi) = (0usize, points.len() - 1, last);
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                let r = eval(points[mid]);
                if meets(&r) {
                    hi = mid;
                    at_hi = r;
                } else {
                    lo = mid;
                }
            }
            (points[hi], at_hi, true)
        }
    } else {
        (points[points.len() - 1], last, false)
    };
    let Some((config, p)) = found else {
        return invalid("no feasible pilot-aided code for this budget");
    };
    Ok(PilotAidedDesign {
        config,
        design_snr_db: snr,
        predicted_bler: p,
        target_met: met,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(blocks: Vec<usize>, pilots: Vec<usize>, k: usize, order: usize) -> SplitRequest {
        SplitRequest {
            block_lengths: blocks,
            pilot_symbols: pilots,
            message_bits: k,
            modulation: order,
            crc_policy: CrcPolicy::AggregateOnZero,
            bicm_seed: Some(crate::modem::DEFAULT_BICM_SEED),
        }
    }

    #[test]
    fn grid_points() {
        let g = SnrGrid { start_db: 0.0, stop_db: 1.0, step_db: 0.25 };
        assert_eq!(g.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn split_design_is_valid_and_meets_target() {
        let req = request(vec![150], vec![16], 150, 4);
        let d = optimize_split(&req, 1e-2, &SnrGrid::default()).unwrap();
        assert!(d.target_met);
        d.config.validate().unwrap();
        assert_eq!(d.config.message_len(), 150);
        let p = predict_split(&d.config, d.design_snr_db).unwrap();
        let total = overall_error(&p).unwrap();
        assert!((total - d.predicted_bler).abs() < 1e-9, "{total} vs {}", d.predicted_bler);
        // One step lower must miss the target.
        let lower = request(vec![150], vec![16], 150, 4);
        let g = SnrGrid { start_db: -10.0, stop_db: d.design_snr_db - 0.25, step_db: 0.25 };
        let miss = optimize_split(&lower, 1e-2, &g).unwrap();
        assert!(!miss.target_met);
    }

    #[test]
    fn minimized_error_is_monotone_in_snr() {
        let req = request(vec![100, 100, 100], vec![8, 8, 8], 300, 16);
        let base = req.skeleton();
        let mut prev = 1.0;
        for snr in (SnrGrid { start_db: 4.0, stop_db: 12.0, step_db: 1.0 }).points() {
            let tx = split_transmitted_means(&base, noise_variance(snr)).unwrap();
            let (err, _, _) = best_split_at(&base, 300, &tx).unwrap().unwrap();
            assert!(err <= prev + 1e-12, "snr {snr}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn degenerate_pilot_budget_forces_the_split() {
        // Four pilot symbols hold 8 bits: the pilot can carry at most 6 after
        // the two monitors, less the punctured positions.
        let req = request(vec![60], vec![4], 40, 4);
        let d = optimize_split(&req, 1e-2, &SnrGrid::default()).unwrap();
        assert_eq!(d.config.info_bits.iter().sum::<usize>(), 40);
        assert!(d.config.info_bits[1] >= 1);
    }

    #[test]
    fn pilot_aided_design() {
        let req = PilotAidedRequest {
            block_lengths: vec![60, 60, 60],
            pilot_lengths: vec![8, 8, 8],
            message_bits: 360,
            modulation: 16,
            bicm_seed: Some(crate::modem::DEFAULT_BICM_SEED),
            pilot_seed: 1,
        };
        let d = design_pilot_aided(&req, 1e-2, &SnrGrid::default()).unwrap();
        assert!(d.target_met);
        let p = predict_pilot_aided(&d.config, d.design_snr_db).unwrap();
        assert!((p - d.predicted_bler).abs() < 1e-12);
        assert!(predict_pilot_aided(&d.config, d.design_snr_db + 1.0).unwrap() <= p);
    }

    #[test]
    fn block_error_monotone_for_fixed_specs() {
        let req = request(vec![100, 100, 100], vec![8, 8, 8], 300, 16);
        let d = optimize_split(&req, 1e-2, &SnrGrid::default()).unwrap();
        let mut prev = vec![1.0; 4];
        for i in 0..40 {
            let snr = d.design_snr_db - 5.0 + 0.25 * i as f64;
            let p = predict_split(&d.config, snr).unwrap();
            for (a, b) in p.iter().zip(&prev) {
                assert!(a <= b, "snr {snr}");
            }
            prev = p;
        }
    }
}
