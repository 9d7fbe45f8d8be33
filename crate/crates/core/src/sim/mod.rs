//! Monte Carlo campaigns.
//!
//! A trial is keyed by `(seed, trial index)`: the message, channel and
//! normalized noise come from separate counter-based streams, so every
//! scheme and SNR point sees the same random inputs. Trials run in batches
//! on a rayon pool; the stopping rule is applied to the ordered outcomes, so
//! results do not depend on the thread count.

pub mod figures;
mod selftest;

pub use figures::{reproduce_figure, Figure, FigureOutput, Scale};
pub use selftest::{selftest, SelftestReport};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::channel::{noise_variance, sample_channel, transmit, trial_rng, FadingModel, Stream};
use crate::design::{
    design_pilot_aided, optimize_split, optimize_split_with_pilots, PilotAidedDesign,
    PilotAidedRequest, SnrGrid, SplitDesign, SplitRequest, DEFAULT_TARGET_BLER,
};
use crate::error::{bad_config, invalid, Error, Result};
use crate::modem::{Constellation, DEFAULT_BICM_SEED};
use crate::rx::{hybrid_decode, pilot_aided_decode};
use crate::tx::{encode_packet, pilot_aided_encode, CrcPolicy, PilotAidedConfig, SplitConfig};

/// Trials evaluated per parallel batch.
pub const BATCH: usize = 512;
pub const DEFAULT_PILOT_CANDIDATES: [usize; 4] = [4, 8, 16, 32];
pub const DEFAULT_CODED_PILOT_CANDIDATES: [usize; 4] = [4, 8, 16, 32];
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    CodedPilot,
    PilotAided,
    Both,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::CodedPilot => "coded-pilot",
            Scheme::PilotAided => "pilot-aided",
            Scheme::Both => "both",
        }
    }
}

/// When to stop simulating one SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_errors: u64,
    /// Trials to run even after `min_errors` is reached.
    pub min_trials: u64,
    pub max_trials: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: 100,
            min_trials: 0,
            max_trials: 1_000_000,
        }
    }
}

fn default_list_size() -> usize {
    8
}
fn default_min_errors() -> u64 {
    StopRule::default().min_errors
}
fn default_max_trials() -> u64 {
    StopRule::default().max_trials
}
fn default_target() -> f64 {
    DEFAULT_TARGET_BLER
}
fn default_bicm_seed() -> Option<u64> {
    Some(DEFAULT_BICM_SEED)
}
fn default_pilot_candidates() -> Vec<usize> {
    DEFAULT_PILOT_CANDIDATES.to_vec()
}
fn default_coded_pilot_candidates() -> Vec<usize> {
    DEFAULT_CODED_PILOT_CANDIDATES.to_vec()
}

/// Campaign description, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub scheme: Scheme,
    /// `K`, before CRC.
    pub message_bits: usize,
    /// `N_t`; give this or `coded_bits`.
    #[serde(default)]
    pub total_symbols: Option<usize>,
    /// `M = n_s N_t`.
    #[serde(default)]
    pub coded_bits: Option<usize>,
    pub blocks: usize,
    pub modulation: usize,
    /// Coded-pilot symbols per block; chosen from `coded_pilot_candidates`
    /// by the designer when absent.
    #[serde(default)]
    pub coded_pilot_symbols: Option<Vec<usize>>,
    #[serde(default = "default_coded_pilot_candidates")]
    pub coded_pilot_candidates: Vec<usize>,
    /// Known pilots per block for the baseline; chosen from
    /// `pilot_candidates` by simulation when absent.
    #[serde(default)]
    pub pilot_length: Option<usize>,
    #[serde(default = "default_pilot_candidates")]
    pub pilot_candidates: Vec<usize>,
    #[serde(default = "default_list_size")]
    pub list_size: usize,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default)]
    pub min_trials: u64,
    #[serde(default = "default_max_trials")]
    pub max_trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub crc_policy: CrcPolicy,
    #[serde(default)]
    pub fading: FadingModel,
    #[serde(default = "default_target")]
    pub target_bler: f64,
    #[serde(default)]
    pub design_grid: SnrGrid,
    #[serde(default = "default_bicm_seed")]
    pub bicm_seed: Option<u64>,
    #[serde(default)]
    pub pilot_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Pre-computed coded-pilot configuration; skips the designer.
    #[serde(default)]
    pub split_design: Option<SplitConfig>,
    /// Pre-computed baseline configuration; skips pilot selection.
    #[serde(default)]
    pub pilot_aided_design: Option<PilotAidedConfig>,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            min_errors: self.min_errors,
            min_trials: self.min_trials,
            max_trials: self.max_trials,
        }
    }

    pub fn total_symbols(&self) -> Result<usize> {
        let n_s = Constellation::new(self.modulation)?.bits_per_symbol();
        match (self.total_symbols, self.coded_bits) {
            (Some(n), None) => Ok(n),
            (None, Some(m)) if m % n_s == 0 => Ok(m / n_s),
            (None, Some(m)) => bad_config(format!("{m} coded bits is not a multiple of {n_s}")),
            _ => bad_config("give exactly one of total_symbols and coded_bits"),
        }
    }

    /// Equal blocks; the remainder goes to the first blocks.
    pub fn block_lengths(&self) -> Result<Vec<usize>> {
        Ok(split_evenly(self.total_symbols()?, self.blocks))
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_errors == 0 {
            return bad_config("min_errors must be at least 1");
        }
        if self.max_trials < self.min_errors {
            return bad_config("max_trials must be at least min_errors");
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad_config("snr_db must be a non-empty list of finite values");
        }
        if self.blocks == 0 {
            return bad_config("blocks must be at least 1");
        }
        if self.list_size == 0 {
            return bad_config("list_size must be at least 1");
        }
        if Constellation::new(self.modulation).is_err() {
            return bad_config(format!("unsupported modulation {}", self.modulation));
        }
        if !(self.target_bler > 0.0 && self.target_bler < 1.0) {
            return bad_config("target_bler must lie in (0, 1)");
        }
        let n = self.total_symbols()?;
        if n < self.blocks {
            return bad_config("fewer channel uses than blocks");
        }
        if let Some(p) = &self.coded_pilot_symbols {
            if p.len() != self.blocks {
                return bad_config("coded_pilot_symbols needs one entry per block");
            }
        }
        if self.coded_pilot_symbols.is_none() && self.coded_pilot_candidates.is_empty() {
            return bad_config("coded_pilot_candidates is empty");
        }
        if self.pilot_length.is_none() && self.pilot_candidates.is_empty() {
            return bad_config("pilot_candidates is empty");
        }
        Ok(())
    }
}

pub fn split_evenly(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|b| total / parts + usize::from(b < total % parts))
        .collect()
}

/// One link to simulate.
#[derive(Debug, Clone, Copy)]
pub enum Link<'a> {
    CodedPilot(&'a SplitConfig),
    PilotAided(&'a PilotAidedConfig),
}

impl Link<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Link::CodedPilot(_) => Scheme::CodedPilot.label(),
            Link::PilotAided(_) => Scheme::PilotAided.label(),
        }
    }

    fn message_len(&self) -> usize {
        match self {
            Link::CodedPilot(c) => c.message_len(),
            Link::PilotAided(c) => c.info_bits,
        }
    }

    fn block_lengths(&self) -> &[usize] {
        match self {
            Link::CodedPilot(c) => &c.block_lengths,
            Link::PilotAided(c) => &c.block_lengths,
        }
    }
}

/// Result of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outcome {
    pub error: bool,
    /// The receiver flagged the packet (CRC failure).
    pub detected: bool,
}

/// Runs trial `t` of `link` at `snr_db`.
pub fn run_trial(
    link: Link<'_>,
    seed: u64,
    t: u64,
    snr_db: f64,
    fading: FadingModel,
    list_size: usize,
) -> Result<Outcome> {
    let sigma2 = noise_variance(snr_db);
    let mut msg_rng = trial_rng(seed, t, Stream::Message);
    let message: Vec<u8> = (0..link.message_len())
        .map(|_| msg_rng.random_range(0..2u8))
        .collect();
    let mut ch_rng = trial_rng(seed, t, Stream::Channel);
    let channel = sample_channel(link.block_lengths(), sigma2, fading, &mut ch_rng)?;
    let mut noise_rng = trial_rng(seed, t, Stream::Noise);
    let (decoded, crc_ok) = match link {
        Link::CodedPilot(cfg) => {
            let y = transmit(&encode_packet(&message, cfg)?, &channel, &mut noise_rng)?;
            let out = hybrid_decode(&y, cfg, sigma2, list_size)?;
            let ok = out.crc_ok();
            (out.message, ok)
        }
        Link::PilotAided(cfg) => {
            let y = transmit(&pilot_aided_encode(&message, cfg)?, &channel, &mut noise_rng)?;
            let out = pilot_aided_decode(&y, cfg, sigma2, list_size)?;
            (out.message, out.crc_ok)
        }
    };
    Ok(Outcome {
        error: !crc_ok || decoded != message,
        detected: !crc_ok,
    })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerRow {
    pub scheme: String,
    pub snr_db: f64,
    pub trials: u64,
    pub block_errors: u64,
    pub bler: f64,
    pub wilson_ci_low: f64,
    pub wilson_ci_high: f64,
    pub seed: u64,
    pub detected_errors: u64,
    pub undetected_errors: u64,
}

/// 95% Wilson score interval.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Thread pool with `threads` workers (0: rayon's default).
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Simulates one SNR point under the stopping rule.
pub fn simulate_point(
    link: Link<'_>,
    snr_db: f64,
    seed: u64,
    stop: StopRule,
    fading: FadingModel,
    list_size: usize,
    pool: &rayon::ThreadPool,
) -> Result<BlerRow> {
    let (mut trials, mut errors, mut detected) = (0u64, 0u64, 0u64);
    let done = |trials: u64, errors: u64| {
        trials >= stop.max_trials || (errors >= stop.min_errors && trials >= stop.min_trials)
    };
    while !done(trials, errors) {
        let end = (trials + BATCH as u64).min(stop.max_trials);
        let outcomes: Vec<Outcome> = pool.install(|| {
            (trials..end)
                .into_par_iter()
                .map(|t| run_trial(link, seed, t, snr_db, fading, list_size))
                .collect::<Result<_>>()
        })?;
        for o in outcomes {
            trials += 1;
            errors += o.error as u64;
            detected += o.detected as u64;
            if done(trials, errors) {
                break;
            }
        }
    }
    let (lo, hi) = wilson_interval(errors, trials);
    Ok(BlerRow {
        scheme: link.label().to_string(),
        snr_db,
        trials,
        block_errors: errors,
        bler: errors as f64 / trials as f64,
        wilson_ci_low: lo,
        wilson_ci_high: hi,
        seed,
        detected_errors: detected,
        undetected_errors: errors - detected,
    })
}

/// Simulates a link over a list of SNR points.
pub fn simulate_curve(
    link: Link<'_>,
    snrs: &[f64],
    seed: u64,
    stop: StopRule,
    fading: FadingModel,
    list_size: usize,
    pool: &rayon::ThreadPool,
) -> Result<Vec<BlerRow>> {
    snrs.iter()
        .map(|&s| simulate_point(link, s, seed, stop, fading, list_size, pool))
        .collect()
}

/// SNR where a curve first crosses `target`, interpolating `log10(bler)`
/// between the bracketing points.
pub fn crossing_snr(rows: &[BlerRow], target: f64) -> Option<f64> {
    let mut sorted: Vec<&BlerRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.bler > target && b.bler <= target {
            if b.bler == 0.0 {
                let t = (a.bler - target) / a.bler;
                return Some(a.snr_db + t * (b.snr_db - a.snr_db));
            }
            let (la, lb, lt) = (a.bler.log10(), b.bler.log10(), target.log10());
            return Some(a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db));
        }
    }
    None
}

/// Coarse Monte Carlo search for the lowest SNR in `[lo, hi]` (to `tol` dB)
/// at which `link` reaches `target`. Returns `hi` when even `hi` misses.
#[allow(clippy::too_many_arguments)]
pub fn required_snr(
    link: Link<'_>,
    target: f64,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
    seed: u64,
    stop: StopRule,
    fading: FadingModel,
    list_size: usize,
    pool: &rayon::ThreadPool,
) -> Result<f64> {
    let meets = |s: f64| -> Result<bool> {
        Ok(simulate_point(link, s, seed, stop, fading, list_size, pool)?.bler <= target)
    };
    if meets(lo)? {
        return Ok(lo);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Pilot-aided candidate evaluated by [`select_pilot_length`].
#[derive(Debug, Clone, PartialEq)]
pub struct PilotChoice {
    pub pilot_length: usize,
    pub required_snr_db: f64,
    pub design: PilotAidedDesign,
}

/// Search settings shared by the Monte Carlo selection routines.
#[derive(Debug, Clone, Copy)]
pub struct SearchSettings {
    pub target_bler: f64,
    pub range_db: (f64, f64),
    pub tol_db: f64,
    pub seed: u64,
    pub stop: StopRule,
    pub fading: FadingModel,
    pub list_size: usize,
}

/// Picks the per-block pilot length whose Monte Carlo required SNR is
/// lowest; ties go to the shorter pilot.
pub fn select_pilot_length(
    req: &PilotAidedRequest,
    candidates: &[usize],
    grid: &SnrGrid,
    search: &SearchSettings,
    pool: &rayon::ThreadPool,
) -> Result<PilotChoice> {
    if candidates.is_empty() {
        return invalid("no pilot length candidates");
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<PilotChoice> = None;
    for p in sorted {
        let mut r = req.clone();
        r.pilot_lengths = vec![p; req.block_lengths.len()];
        let Ok(design) = design_pilot_aided(&r, search.target_bler, grid) else {
            continue;
        };
        let snr = required_snr(
            Link::PilotAided(&design.config),
            search.target_bler,
            search.range_db,
            search.tol_db,
            search.seed,
            search.stop,
            search.fading,
            search.list_size,
            pool,
        )?;
        if best.as_ref().is_none_or(|b| snr < b.required_snr_db) {
            best = Some(PilotChoice {
                pilot_length: p,
                required_snr_db: snr,
                design,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no feasible pilot length".into()))
}

/// Designs resolved for a campaign.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub coded_pilot: Option<SplitDesign>,
    pub pilot_aided: Option<PilotAidedDesign>,
    /// Monte Carlo required SNR per pilot candidate, when selection ran.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pilot_search: Vec<(usize, f64)>,
}

impl DesignReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Resolves the codes a campaign needs: supplied designs are validated,
/// missing ones are produced by the designer.
pub fn resolve_designs(cfg: &CampaignConfig, pool: &rayon::ThreadPool) -> Result<DesignReport> {
    cfg.validate()?;
    let blocks = cfg.block_lengths()?;
    let mut report = DesignReport::default();
    if cfg.scheme != Scheme::PilotAided {
        report.coded_pilot = Some(match &cfg.split_design {
            Some(s) => {
                s.validate()?;
                SplitDesign {
                    config: s.clone(),
                    design_snr_db: f64::NAN,
                    component_errors: Vec::new(),
                    predicted_bler: f64::NAN,
                    target_met: false,
                }
            }
            None => {
                let req = SplitRequest {
                    block_lengths: blocks.clone(),
                    pilot_symbols: cfg.coded_pilot_symbols.clone().unwrap_or_default(),
                    message_bits: cfg.message_bits,
                    modulation: cfg.modulation,
                    crc_policy: cfg.crc_policy,
                    bicm_seed: cfg.bicm_seed,
                };
                match &cfg.coded_pilot_symbols {
                    Some(_) => optimize_split(&req, cfg.target_bler, &cfg.design_grid)?,
                    None => optimize_split_with_pilots(
                        &req,
                        &cfg.coded_pilot_candidates,
                        cfg.target_bler,
                        &cfg.design_grid,
                    )?,
                }
            }
        });
    }
    if cfg.scheme != Scheme::CodedPilot {
        let req = PilotAidedRequest {
            block_lengths: blocks.clone(),
            pilot_lengths: vec![cfg.pilot_length.unwrap_or(0); blocks.len()],
            message_bits: cfg.message_bits,
            modulation: cfg.modulation,
            bicm_seed: cfg.bicm_seed,
            pilot_seed: cfg.pilot_seed,
        };
        report.pilot_aided = Some(match (&cfg.pilot_aided_design, cfg.pilot_length) {
            (Some(p), _) => {
                p.validate()?;
                PilotAidedDesign {
                    config: p.clone(),
                    design_snr_db: f64::NAN,
                    predicted_bler: f64::NAN,
                    target_met: false,
                }
            }
            (None, Some(_)) => design_pilot_aided(&req, cfg.target_bler, &cfg.design_grid)?,
            (None, None) => {
                let (lo, hi) = snr_span(&cfg.snr_db);
                let search = SearchSettings {
                    target_bler: cfg.target_bler,
                    range_db: (lo, hi),
                    tol_db: 0.25,
                    seed: cfg.seed,
                    stop: cfg.stop_rule(),
                    fading: cfg.fading,
                    list_size: cfg.list_size,
                };
                let choice =
                    select_pilot_length(&req, &cfg.pilot_candidates, &cfg.design_grid, &search, pool)?;
                report.pilot_search.push((choice.pilot_length, choice.required_snr_db));
                choice.design
            }
        });
    }
    Ok(report)
}

fn snr_span(snrs: &[f64]) -> (f64, f64) {
    let lo = snrs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = snrs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Runs a full campaign: resolves designs, then simulates every scheme at
/// every SNR point.
pub fn run_campaign(cfg: &CampaignConfig, threads: usize) -> Result<(DesignReport, Vec<BlerRow>)> {
    let pool = thread_pool(threads)?;
    let report = resolve_designs(cfg, &pool)?;
    let mut rows = Vec::new();
    let stop = cfg.stop_rule();
    if let Some(d) = &report.coded_pilot {
        rows.extend(simulate_curve(
            Link::CodedPilot(&d.config),
            &cfg.snr_db,
            cfg.seed,
            stop,
            cfg.fading,
            cfg.list_size,
            &pool,
        )?);
    }
    if let Some(d) = &report.pilot_aided {
        rows.extend(simulate_curve(
            Link::PilotAided(&d.config),
            &cfg.snr_db,
            cfg.seed,
            stop,
            cfg.fading,
            cfg.list_size,
            &pool,
        )?);
    }
    Ok((report, rows))
}

/// CSV text of a curve (header row included).
pub fn to_csv(rows: &[BlerRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "scheme",
            "snr_db",
            "trials",
            "block_errors",
            "bler",
            "wilson_ci_low",
            "wilson_ci_high",
            "seed",
            "detected_errors",
            "undetected_errors",
        ])
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_csv(rows: &[BlerRow], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(rows)?)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::testing::{pilot_aided_config, split_config};

    fn config_json() -> String {
        r#"{
            "scheme": "coded-pilot",
            "message_bits": 100,
            "coded_bits": 300,
            "blocks": 1,
            "modulation": 4,
            "coded_pilot_symbols": [16],
            "snr_db": [30.0],
            "min_errors": 5,
            "max_trials": 1000,
            "seed": 7,
            "crc_policy": "aggregate-on-0"
        }"#
        .to_string()
    }

    #[test]
    fn config_parsing() {
        let cfg = CampaignConfig::from_json(&config_json()).unwrap();
        assert_eq!(cfg.total_symbols().unwrap(), 150);
        assert_eq!(cfg.list_size, 8);
        assert_eq!(cfg.crc_policy, CrcPolicy::AggregateOnZero);
        let bad = config_json().replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1");
        assert!(matches!(CampaignConfig::from_json(&bad), Err(Error::InvalidConfig(_))));
        let bad = config_json().replace("\"min_errors\": 5", "\"min_errors\": 0");
        assert!(CampaignConfig::from_json(&bad).is_err());
        let bad = config_json().replace("\"max_trials\": 1000", "\"max_trials\": 2");
        assert!(CampaignConfig::from_json(&bad).is_err());
        let bad = config_json().replace("[30.0]", "[]");
        assert!(CampaignConfig::from_json(&bad).is_err());
        assert_eq!(split_evenly(10, 3), vec![4, 3, 3]);
    }

    #[test]
    fn wilson_brackets_estimate() {
        for (e, n) in [(0, 10), (3, 10), (10, 10), (1, 1_000_000), (57, 2000)] {
            let (lo, hi) = wilson_interval(e, n);
            let p = e as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
    }

    #[test]
    fn saturated_snr_has_no_errors() {
        let pool = thread_pool(1).unwrap();
        let split = split_config(vec![100], vec![16], vec![120, 6], 16, CrcPolicy::PerComponent);
        let pa = pilot_aided_config(vec![100], vec![8], 120, 16);
        let stop = StopRule { min_errors: 1, min_trials: 0, max_trials: 1000 };
        for link in [Link::CodedPilot(&split), Link::PilotAided(&pa)] {
            let row = simulate_point(link, 30.0, 3, stop, FadingModel::UnitPhase, 4, &pool).unwrap();
            assert_eq!(row.trials, 1000);
            assert_eq!(row.block_errors, 0);
        }
    }

    #[test]
    fn accounting_and_determinism() {
        let split = split_config(vec![60, 60], vec![8, 8], vec![150, 4, 4], 16, CrcPolicy::AggregateOnZero);
        let stop = StopRule { min_errors: 30, min_trials: 0, max_trials: 3000 };
        let mut outputs = Vec::new();
        for threads in [1, 3] {
            let pool = thread_pool(threads).unwrap();
            let rows = simulate_curve(Link::CodedPilot(&split), &[2.0, 6.0], 11, stop, FadingModel::UnitPhase, 2, &pool).unwrap();
            for r in &rows {
                assert_eq!(r.block_errors, r.detected_errors + r.undetected_errors);
                assert!((r.bler - r.block_errors as f64 / r.trials as f64).abs() < 1e-15);
                assert!(r.block_errors >= stop.min_errors || r.trials == stop.max_trials);
            }
            outputs.push(to_csv(&rows).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
        let header = outputs[0].lines().next().unwrap();
        assert_eq!(
            header,
            "scheme,snr_db,trials,block_errors,bler,wilson_ci_low,wilson_ci_high,seed,detected_errors,undetected_errors"
        );
    }

    #[test]
    fn row_reproduces_from_seed() {
        let pool = thread_pool(2).unwrap();
        let pa = pilot_aided_config(vec![80], vec![8], 100, 16);
        let stop = StopRule { min_errors: 10, min_trials: 0, max_trials: 2000 };
        let a = simulate_point(Link::PilotAided(&pa), 8.0, 5, stop, FadingModel::UnitPhase, 1, &pool).unwrap();
        let b = simulate_point(Link::PilotAided(&pa), 8.0, 5, stop, FadingModel::UnitPhase, 1, &pool).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crossing_interpolation() {
        let row = |snr: f64, bler: f64| BlerRow {
            scheme: "x".into(),
            snr_db: snr,
            trials: 100,
            block_errors: 0,
            bler,
            wilson_ci_low: 0.0,
            wilson_ci_high: 1.0,
            seed: 0,
            detected_errors: 0,
            undetected_errors: 0,
        };
        let rows = vec![row(0.0, 1e-1), row(1.0, 1e-3)];
        assert!((crossing_snr(&rows, 1e-2).unwrap() - 0.5).abs() < 1e-12);
        assert!(crossing_snr(&rows, 1e-4).is_none());
    }

    #[test]
    fn pilot_selection_rules() {
        let pool = thread_pool(1).unwrap();
        let req = PilotAidedRequest {
            block_lengths: vec![60],
            pilot_lengths: vec![0],
            message_bits: 40,
            modulation: 4,
            bicm_seed: Some(DEFAULT_BICM_SEED),
            pilot_seed: 0,
        };
        let search = SearchSettings {
            target_bler: 1e-2,
            range_db: (25.0, 30.0),
            tol_db: 0.5,
            seed: 1,
            stop: StopRule { min_errors: 5, min_trials: 0, max_trials: 300 },
            fading: FadingModel::UnitPhase,
            list_size: 1,
        };
        let grid = SnrGrid::default();
        let one = select_pilot_length(&req, &[8], &grid, &search, &pool).unwrap();
        assert_eq!(one.pilot_length, 8);
        // High SNR: every candidate meets the target at the lower bound.
        let tie = select_pilot_length(&req, &[16, 4, 8], &grid, &search, &pool).unwrap();
        assert_eq!(tie.pilot_length, 4);
        assert_eq!(tie.required_snr_db, 25.0);
    }
}
