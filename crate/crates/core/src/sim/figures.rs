//! Recipes regenerating the published result sets.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::{
    crossing_snr, select_pilot_length, simulate_point, split_evenly, thread_pool, to_csv, BlerRow,
    Link, PilotChoice, SearchSettings, StopRule, DEFAULT_CODED_PILOT_CANDIDATES,
    DEFAULT_PILOT_CANDIDATES,
};
use crate::channel::FadingModel;
use crate::design::{
    optimize_split, optimize_split_with_pilots, overall_error, predict_pilot_aided, predict_split,
    PilotAidedRequest, SnrGrid, SplitDesign, SplitRequest,
};
use crate::error::{Error, Result};
use crate::modem::{Constellation, DEFAULT_BICM_SEED};
use crate::tx::{CrcPolicy, SplitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig5,
    Fig6,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Figure::Fig3),
            "fig5" => Ok(Figure::Fig5),
            "fig6" => Ok(Figure::Fig6),
            _ => Err(Error::InvalidArgument(format!("unknown figure {s:?}"))),
        }
    }
}

/// Effort level of a reproduction run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Seconds; checks the plumbing only.
    Smoke,
    /// Minutes on one core; BLER target 1e-2 with 2e4 trials per point.
    Desk,
    /// Hours; BLER target 1e-3 with the default stopping rule.
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::InvalidArgument(format!("unknown scale {s:?}"))),
        }
    }
}

impl Scale {
    pub fn target_bler(self) -> f64 {
        match self {
            Scale::Full => 1e-3,
            _ => 1e-2,
        }
    }

    /// Stopping rule of reported curve points.
    pub fn stop_rule(self) -> StopRule {
        match self {
            Scale::Smoke => StopRule { min_errors: 20, min_trials: 0, max_trials: 300 },
            Scale::Desk => StopRule { min_errors: 1, min_trials: 20_000, max_trials: 20_000 },
            Scale::Full => StopRule::default(),
        }
    }

    /// Stopping rule of the pilot-length search.
    pub fn search_rule(self) -> StopRule {
        match self {
            Scale::Smoke => StopRule { min_errors: 10, min_trials: 0, max_trials: 200 },
            Scale::Desk => StopRule { min_errors: 50, min_trials: 0, max_trials: 5_000 },
            Scale::Full => StopRule { min_errors: 50, min_trials: 0, max_trials: 50_000 },
        }
    }

    fn curve_step_db(self) -> f64 {
        match self {
            Scale::Smoke => 1.0,
            _ => 0.5,
        }
    }
}

/// Files and summary written by [`reproduce_figure`].
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Overall predicted BLER of a split configuration.
pub fn predicted_split_bler(cfg: &SplitConfig, snr_db: f64) -> Result<f64> {
    overall_error(&predict_split(cfg, snr_db)?)
}

/// SNR in `[lo, hi]` where a nonincreasing `bler(snr)` reaches `target`,
/// to 1e-4 dB. `None` when the bracket does not contain a crossing.
pub fn predicted_crossing(
    bler: impl Fn(f64) -> Result<f64>,
    target: f64,
    (mut lo, mut hi): (f64, f64),
) -> Result<Option<f64>> {
    if bler(lo)? <= target || bler(hi)? > target {
        return Ok(None);
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if bler(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Monte Carlo curve on a `step`-spaced grid around `center`, widened until
/// it brackets `target`; returns the rows and the interpolated crossing.
#[allow(clippy::too_many_arguments)]
pub fn measure_crossing(
    link: Link<'_>,
    target: f64,
    center: f64,
    step: f64,
    seed: u64,
    stop: StopRule,
    list_size: usize,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<BlerRow>, Option<f64>)> {
    const MAX_EXTENSIONS: usize = 16;
    let start = (center / step).round() * step;
    let point = |s: f64| simulate_point(link, s, seed, stop, FadingModel::UnitPhase, list_size, pool);
    let mut rows = vec![point(start - step)?, point(start)?, point(start + step)?];
    for _ in 0..MAX_EXTENSIONS {
        if crossing_snr(&rows, target).is_some() {
            break;
        }
        if rows.iter().all(|r| r.bler > target) {
            let s = rows.last().expect("non-empty").snr_db + step;
            rows.push(point(s)?);
        } else {
            let s = rows[0].snr_db - step;
            rows.insert(0, point(s)?);
        }
    }
    let crossing = crossing_snr(&rows, target);
    Ok((rows, crossing))
}

/// Symbols carrying `coded_bits` at `modulation`.
pub fn symbols_for(coded_bits: usize, modulation: usize) -> Result<usize> {
    Ok(coded_bits / Constellation::new(modulation)?.bits_per_symbol())
}

/// Single-block design with `pilot_bits` coded-pilot bits.
pub fn single_block_design(
    coded_bits: usize,
    pilot_bits: usize,
    message_bits: usize,
    modulation: usize,
    target: f64,
) -> Result<SplitDesign> {
    let req = SplitRequest {
        block_lengths: vec![symbols_for(coded_bits, modulation)?],
        pilot_symbols: vec![pilot_bits / 2],
        message_bits,
        modulation,
        crc_policy: CrcPolicy::AggregateOnZero,
        bicm_seed: Some(DEFAULT_BICM_SEED),
    };
    optimize_split(&req, target, &SnrGrid::default())
}

/// One rate point of the DEGA-versus-simulation comparison.
#[derive(Debug, Clone)]
pub struct TheoryPoint {
    pub modulation: usize,
    pub message_bits: usize,
    pub design: SplitDesign,
    pub rows: Vec<BlerRow>,
    pub predicted: Vec<f64>,
    pub predicted_crossing: Option<f64>,
    pub measured_crossing: Option<f64>,
}

/// Designs the `M = 600`, `M_1 = 32` code for `message_bits` and compares
/// its predicted and simulated BLER with SC decoding.
pub fn theory_point(
    modulation: usize,
    message_bits: usize,
    scale: Scale,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> Result<TheoryPoint> {
    let target = scale.target_bler();
    let design = single_block_design(600, 32, message_bits, modulation, target)?;
    let cfg = &design.config;
    let d = design.design_snr_db;
    let predicted_crossing =
        predicted_crossing(|s| predicted_split_bler(cfg, s), target, (d - 10.0, d + 10.0))?;
    let center = predicted_crossing.unwrap_or(d);
    let (rows, measured_crossing) = measure_crossing(
        Link::CodedPilot(cfg),
        target,
        center,
        scale.curve_step_db(),
        seed,
        scale.stop_rule(),
        1,
        pool,
    )?;
    let predicted = rows
        .iter()
        .map(|r| predicted_split_bler(cfg, r.snr_db))
        .collect::<Result<_>>()?;
    Ok(TheoryPoint {
        modulation,
        message_bits,
        design,
        rows,
        predicted,
        predicted_crossing,
        measured_crossing,
    })
}

/// One configuration of the scheme comparison.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub modulation: usize,
    pub message_bits: usize,
    pub coded: SplitDesign,
    pub pilot: PilotChoice,
    pub coded_rows: Vec<BlerRow>,
    pub pilot_rows: Vec<BlerRow>,
    pub coded_crossing: Option<f64>,
    pub pilot_crossing: Option<f64>,
}

impl Comparison {
    /// Pilot-aided required SNR minus coded-pilot required SNR.
    pub fn gain_db(&self) -> Option<f64> {
        Some(self.pilot_crossing? - self.coded_crossing?)
    }
}

/// Compares the coded-pilot scheme with the pilot-aided baseline over
/// `blocks` equal blocks of `coded_bits` total coded bits, SCL list `L = 8`.
pub fn compare_schemes(
    blocks: usize,
    coded_bits: usize,
    modulation: usize,
    message_bits: usize,
    scale: Scale,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> Result<Comparison> {
    const LIST: usize = 8;
    let target = scale.target_bler();
    let grid = SnrGrid::default();
    let block_lengths = split_evenly(symbols_for(coded_bits, modulation)?, blocks);
    let req = SplitRequest {
        block_lengths: block_lengths.clone(),
        pilot_symbols: Vec::new(),
        message_bits,
        modulation,
        crc_policy: CrcPolicy::AggregateOnZero,
        bicm_seed: Some(DEFAULT_BICM_SEED),
    };
    let coded = optimize_split_with_pilots(&req, &DEFAULT_CODED_PILOT_CANDIDATES, target, &grid)?;
    let cfg = &coded.config;
    let d = coded.design_snr_db;
    let coded_guess =
        predicted_crossing(|s| predicted_split_bler(cfg, s), target, (d - 10.0, d + 10.0))?.unwrap_or(d);

    let pa_req = PilotAidedRequest {
        block_lengths,
        pilot_lengths: Vec::new(),
        message_bits,
        modulation,
        bicm_seed: Some(DEFAULT_BICM_SEED),
        pilot_seed: seed,
    };
    let search = SearchSettings {
        target_bler: target,
        range_db: (coded_guess - 3.0, coded_guess + 9.0),
        tol_db: 0.25,
        seed,
        stop: scale.search_rule(),
        fading: FadingModel::UnitPhase,
        list_size: LIST,
    };
    let pilot = select_pilot_length(&pa_req, &DEFAULT_PILOT_CANDIDATES, &grid, &search, pool)?;
    let pa = &pilot.design.config;
    let pd = pilot.design.design_snr_db;
    let pilot_guess = predicted_crossing(|s| predict_pilot_aided(pa, s), target, (pd - 10.0, pd + 10.0))?
        .unwrap_or(pilot.required_snr_db);

    let step = scale.curve_step_db();
    let stop = scale.stop_rule();
    let (coded_rows, coded_crossing) =
        measure_crossing(Link::CodedPilot(cfg), target, coded_guess, step, seed, stop, LIST, pool)?;
    let (pilot_rows, pilot_crossing) =
        measure_crossing(Link::PilotAided(pa), target, pilot_guess, step, seed, stop, LIST, pool)?;
    Ok(Comparison {
        modulation,
        message_bits,
        coded,
        pilot,
        coded_rows,
        pilot_rows,
        coded_crossing,
        pilot_crossing,
    })
}

/// One optimizer run of a rate-ratio sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub panel: &'static str,
    pub variable: &'static str,
    pub value: usize,
    pub k0: usize,
    pub k1: usize,
    pub r0: f64,
    pub r1: f64,
    pub ratio: f64,
    pub design_snr_db: f64,
}

fn ratio_point(
    panel: &'static str,
    variable: &'static str,
    value: usize,
    design: &SplitDesign,
) -> RatioPoint {
    let r = design.rates();
    RatioPoint {
        panel,
        variable,
        value,
        k0: design.config.component_info_len(0),
        k1: design.config.component_info_len(1),
        r0: r[0],
        r1: r[1],
        ratio: design.rate_ratio(),
        design_snr_db: design.design_snr_db,
    }
}

/// Sweep values of the three rate-ratio panels.
pub fn ratio_sweeps(scale: Scale) -> [Vec<usize>; 3] {
    match scale {
        Scale::Smoke => [vec![200, 600, 1000], vec![8, 32, 160], vec![4, 16, 64]],
        _ => [
            (1..=10).map(|i| 100 * i).collect(),
            vec![8, 16, 32, 64, 96, 128, 160],
            vec![4, 16, 64],
        ],
    }
}

/// Optimized `R_1 / R_0` versus packet size (4-QAM, `K = M / 2`,
/// `M_1 = 32`), coded-pilot size (`M = 600`, `K = 300`, 4-QAM) and
/// modulation order (`M = 600`, `K = 150`, `M_1 = 32`). DEGA only.
pub fn rate_ratio_panels(scale: Scale) -> Result<[Vec<RatioPoint>; 3]> {
    let target = scale.target_bler();
    let [sizes, pilots, orders] = ratio_sweeps(scale);
    let a = sizes
        .iter()
        .map(|&m| Ok(ratio_point("a", "coded_bits", m, &single_block_design(m, 32, m / 2, 4, target)?)))
        .collect::<Result<_>>()?;
    let b = pilots
        .iter()
        .map(|&p| Ok(ratio_point("b", "pilot_bits", p, &single_block_design(600, p, 300, 4, target)?)))
        .collect::<Result<_>>()?;
    let c = orders
        .iter()
        .map(|&q| Ok(ratio_point("c", "modulation", q, &single_block_design(600, 32, 150, q, target)?)))
        .collect::<Result<_>>()?;
    Ok([a, b, c])
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn fmt_db(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn relabel(rows: &mut [BlerRow], tag: &str) {
    for r in rows {
        r.scheme = format!("{}/{tag}", r.scheme);
    }
}

/// Runs one figure's configuration set and writes `<name>.csv` (plus
/// auxiliary CSVs) and `<name>_summary.txt` into `out_dir`.
pub fn reproduce_figure(
    figure: Figure,
    scale: Scale,
    out_dir: &Path,
    seed: u64,
    threads: usize,
) -> Result<FigureOutput> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", out_dir.display())))?;
    let pool = thread_pool(threads)?;
    let name = figure.name();
    let target = scale.target_bler();
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut rows = Vec::new();
    match figure {
        Figure::Fig3 => {
            let orders: &[usize] = if scale == Scale::Full { &[4, 16, 64] } else { &[4] };
            let mut dega = String::from("scheme,snr_db,predicted_bler\n");
            writeln!(summary, "BLER target {target:e}, M=600, M_1=32, B=1, L=1").ok();
            writeln!(summary, "{:<22} {:>8} {:>10} {:>10} {:>12}", "config", "snr_db", "mc_bler", "dega_bler", "trials").ok();
            for &q in orders {
                for k in [150, 300, 450] {
                    let mut p = theory_point(q, k, scale, seed, &pool)?;
                    let tag = format!("{q}qam/k{k}");
                    relabel(&mut p.rows, &tag);
                    for (r, pred) in p.rows.iter().zip(&p.predicted) {
                        writeln!(dega, "{},{},{pred:e}", r.scheme, r.snr_db).ok();
                        writeln!(summary, "{:<22} {:>8.2} {:>10.3e} {:>10.3e} {:>12}", tag, r.snr_db, r.bler, pred, r.trials).ok();
                    }
                    writeln!(
                        summary,
                        "{tag}: crossing dega {} dB, monte carlo {} dB",
                        fmt_db(p.predicted_crossing),
                        fmt_db(p.measured_crossing)
                    )
                    .ok();
                    rows.extend(p.rows);
                }
            }
            write(out_dir.join(format!("{name}_dega.csv")), &dega, &mut files)?;
        }
        Figure::Fig5 => {
            let cases: Vec<(usize, usize)> = match scale {
                Scale::Smoke => vec![(16, 360)],
                Scale::Desk => vec![(16, 360), (16, 540)],
                Scale::Full => [4, 16, 64]
                    .iter()
                    .flat_map(|&q| [180, 360, 540].map(|k| (q, k)))
                    .collect(),
            };
            writeln!(summary, "BLER target {target:e}, M=720, B=3, L=8").ok();
            writeln!(
                summary,
                "{:<14} {:>14} {:>12} {:>14} {:>12} {:>8}",
                "config", "coded_pilots", "coded_db", "pilot_length", "pilot_db", "gain_db"
            )
            .ok();
            for (q, k) in cases {
                let mut c = compare_schemes(3, 720, q, k, scale, seed, &pool)?;
                let tag = format!("{q}qam/k{k}");
                relabel(&mut c.coded_rows, &tag);
                relabel(&mut c.pilot_rows, &tag);
                writeln!(
                    summary,
                    "{:<14} {:>14} {:>12} {:>14} {:>12} {:>8}",
                    tag,
                    c.coded.config.pilot_symbols[0],
                    fmt_db(c.coded_crossing),
                    c.pilot.pilot_length,
                    fmt_db(c.pilot_crossing),
                    fmt_db(c.gain_db())
                )
                .ok();
                rows.extend(c.coded_rows);
                rows.extend(c.pilot_rows);
            }
        }
        Figure::Fig6 => {
            let mut w = csv::Writer::from_writer(Vec::new());
            writeln!(summary, "BLER target {target:e}, B=1, DEGA designs").ok();
            writeln!(summary, "{:<6} {:<12} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}", "panel", "variable", "value", "k0", "k1", "r0", "r1", "ratio").ok();
            for panel in rate_ratio_panels(scale)? {
                for p in panel {
                    writeln!(
                        summary,
                        "{:<6} {:<12} {:>6} {:>6} {:>6} {:>8.4} {:>8.4} {:>8.4}",
                        p.panel, p.variable, p.value, p.k0, p.k1, p.r0, p.r1, p.ratio
                    )
                    .ok();
                    w.serialize(&p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                }
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            write(out_dir.join(format!("{name}.csv")), &String::from_utf8_lossy(&bytes), &mut files)?;
        }
    }
    if figure != Figure::Fig6 {
        write(out_dir.join(format!("{name}.csv")), &to_csv(&rows)?, &mut files)?;
    }
    write(out_dir.join(format!("{name}_summary.txt")), &summary, &mut files)?;
    Ok(FigureOutput { files, summary })
}
