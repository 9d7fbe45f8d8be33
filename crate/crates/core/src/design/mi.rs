//! BICM bit-level mutual information and BI-AWGN equivalent channels.
//!
//! Square Gray QAM with the per-axis labeling factors into two independent
//! PAM channels (even label bits on the in-phase axis, odd bits on the
//! quadrature axis), so every quantity here is a one-dimensional integral.
//! They are evaluated by composite Gauss-Legendre quadrature with panel
//! breaks at the PAM decision midpoints, where the integrands bend sharply
//! at high SNR. Values are kept in "loss" form (`1 - I` per bit) so that
//! channels near full capacity keep their relative precision.

use gauss_quad::legendre::GaussLegendre;
use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Mutex, OnceLock};

use crate::error::{invalid, Result};
use crate::modem::Constellation;

/// Gauss-Legendre nodes per panel.
pub const PANEL_NODES: usize = 16;
/// Panel width in noise standard deviations.
pub const PANEL_WIDTH: f64 = 0.25;
/// Integration range in noise standard deviations.
pub const RANGE_SIGMAS: f64 = 12.0;

const MIN_SIGMA2: f64 = 1e-6;
const MAX_SIGMA2: f64 = 1e6;

fn legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let q = GaussLegendre::new(PANEL_NODES.try_into().expect("non-zero"));
        q.nodes().copied().zip(q.weights().copied()).collect()
    })
}

/// Standard-normal expectation of `f` over `[-RANGE, RANGE]`, with extra
/// panel breaks at `breaks`.
fn gaussian_expectation(breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut edges: Vec<f64> = (0..)
        .map(|i| -RANGE_SIGMAS + i as f64 * PANEL_WIDTH)
        .take_while(|&z| z <= RANGE_SIGMAS + 1e-12)
        .chain(breaks.iter().copied().filter(|z| z.abs() < RANGE_SIGMAS))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for &(x, wt) in legendre() {
            let z = mid + half * x;
            acc += wt * half * norm * (-0.5 * z * z).exp() * f(z);
        }
    }
    acc
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// One real axis: amplitudes and the label bits they carry.
struct Pam {
    levels: Vec<f64>,
    labels: Vec<usize>,
    bits: usize,
}

impl Pam {
    /// Per-bit losses and the symbol loss (bits) in real noise of variance
    /// `var`.
    fn losses(&self, var: f64) -> (Vec<f64>, f64) {
        let sd = var.sqrt();
        let mut sorted = self.levels.clone();
        sorted.sort_by(f64::total_cmp);
        let mids: Vec<f64> = sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut bit_loss = vec![0.0; self.bits];
        let mut symbol = 0.0;
        let mut metric = vec![0.0; self.levels.len()];
        for (&a, &label) in self.levels.iter().zip(&self.labels) {
            let breaks: Vec<f64> = mids.iter().map(|m| (m - a) / sd).collect();
            symbol += gaussian_expectation(&breaks, |z| {
                let y = a + sd * z;
                for (m, &l) in metric.iter_mut().zip(&self.levels) {
                    *m = -(y - l) * (y - l) / (2.0 * var);
                }
                log_sum_exp(&metric) + z * z / 2.0
            });
            for (k, loss) in bit_loss.iter_mut().enumerate() {
                let bit = (label >> k) & 1;
                *loss += gaussian_expectation(&breaks, |z| {
                    let y = a + sd * z;
                    for (m, &l) in metric.iter_mut().zip(&self.levels) {
                        *m = -(y - l) * (y - l) / (2.0 * var);
                    }
                    let all = log_sum_exp(&metric);
                    let other: f64 = metric
                        .iter()
                        .zip(&self.labels)
                        .filter(|(_, &l)| (l >> k) & 1 != bit)
                        .map(|(&m, _)| (m - all).exp())
                        .sum();
                    // -ln(1 - other) keeps precision when `other` is tiny.
                    if other < 0.5 {
                        -(-other).ln_1p()
                    } else {
                        -(1.0 - other).max(f64::MIN_POSITIVE).ln()
                    }
                });
            }
        }
        let scale = 1.0 / (self.levels.len() as f64 * LN_2);
        (
            bit_loss.into_iter().map(|l| (l * scale).max(0.0)).collect(),
            (symbol * scale).max(0.0),
        )
    }
}

/// Splits a constellation into its in-phase and quadrature PAM axes.
fn axes(c: &Constellation) -> (Pam, Pam) {
    let n_s = c.bits_per_symbol();
    let half = n_s / 2;
    let spread = |label: usize, parity: usize| -> usize {
        (0..half).map(|j| ((label >> j) & 1) << (2 * j + parity)).sum()
    };
    let axis = |parity: usize| {
        let (levels, labels) = (0..1usize << half)
            .map(|l| {
                let p = c.points()[spread(l, parity)];
                (if parity == 0 { p.re } else { p.im }, l)
            })
            .unzip();
        Pam {
            levels,
            labels,
            bits: half,
        }
    };
    (axis(0), axis(1))
}

/// Per-level losses `1 - I(B_k; Y)` and the symbol loss `n_s - I(X; Y)`,
/// all in bits.
pub fn bicm_losses(c: &Constellation, sigma2: f64) -> (Vec<f64>, f64) {
    let (i_axis, q_axis) = axes(c);
    let (li, si) = i_axis.losses(sigma2 / 2.0);
    let (lq, sq) = q_axis.losses(sigma2 / 2.0);
    let levels = (0..c.bits_per_symbol())
        .map(|k| if k % 2 == 0 { li[k / 2] } else { lq[k / 2] })
        .collect();
    (levels, si + sq)
}

/// Mutual information of the `k`-th BICM bit channel.
pub fn bicm_bit_mi(c: &Constellation, k: usize, sigma2: f64) -> Result<f64> {
    if sigma2 <= 0.0 || k >= c.bits_per_symbol() {
        return invalid("bit level out of range or non-positive noise variance");
    }
    Ok(1.0 - bicm_losses(c, sigma2).0[k])
}

/// Symbol-level mutual information `I(X; Y)` in bits.
pub fn symbol_mi(c: &Constellation, sigma2: f64) -> Result<f64> {
    if sigma2 <= 0.0 {
        return invalid("non-positive noise variance");
    }
    Ok(c.bits_per_symbol() as f64 - bicm_losses(c, sigma2).1)
}

/// `1 - C` for unit-amplitude BPSK in real noise of variance `sigma2`.
pub fn biawgn_loss(sigma2: f64) -> f64 {
    let bpsk = Pam {
        levels: vec![1.0, -1.0],
        labels: vec![0, 1],
        bits: 1,
    };
    bpsk.losses(sigma2).0[0]
}

/// Capacity of the unit-amplitude binary-input AWGN channel.
pub fn biawgn_mi(sigma2: f64) -> f64 {
    1.0 - biawgn_loss(sigma2)
}

/// Noise variance whose BI-AWGN loss equals `loss`, clamped to
/// `[1e-6, 1e6]`.
///
/// Root-finds `ln loss(e^x) = ln loss` by the Illinois variant of regula
/// falsi; the map is smooth and increasing, so it converges in a few
/// evaluations while keeping the bracket.
pub fn match_loss(loss: f64) -> f64 {
    let f = |x: f64| biawgn_loss(x.exp()).max(f64::MIN_POSITIVE).ln() - loss.ln();
    let (mut lo, mut hi) = (MIN_SIGMA2.ln(), MAX_SIGMA2.ln());
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo >= 0.0 {
        return MIN_SIGMA2;
    }
    if fhi <= 0.0 {
        return MAX_SIGMA2;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (lo * fhi - hi * flo) / (fhi - flo);
        let fx = f(x);
        if fx.abs() < 1e-13 || hi - lo < 1e-13 {
            return x.exp();
        }
        if fx < 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi /= 2.0;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo /= 2.0;
            }
            side = 1;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Inverse of [`biawgn_mi`].
pub fn match_equivalent_snr(mi: f64) -> Result<f64> {
    if !(mi > 0.0 && mi < 1.0) {
        return invalid(format!("mutual information {mi} outside (0, 1)"));
    }
    Ok(match_loss(1.0 - mi))
}

/// Equivalent BI-AWGN noise variance per bit level of a constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct BitLevelProfile {
    pub order: usize,
    pub sigma2: f64,
    pub variances: Vec<f64>,
}

impl BitLevelProfile {
    /// Matches every bit level's mutual information. Results are cached per
    /// (order, variance).
    pub fn new(c: &Constellation, sigma2: f64) -> Result<Self> {
        if sigma2 <= 0.0 {
            return invalid("non-positive noise variance");
        }
        type Cache = Mutex<HashMap<(usize, u64), Vec<f64>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (c.order(), sigma2.to_bits());
        let cache = CACHE.get_or_init(Default::default);
        if let Some(v) = cache.lock().expect("cache lock").get(&key) {
            return Ok(Self {
                order: c.order(),
                sigma2,
                variances: v.clone(),
            });
        }
        let variances: Vec<f64> = bicm_losses(c, sigma2).0.into_iter().map(match_loss).collect();
        cache
            .lock()
            .expect("cache lock")
            .insert(key, variances.clone());
        Ok(Self {
            order: c.order(),
            sigma2,
            variances,
        })
    }

    /// Initial LLR mean `2 / sigma_k^2` of bit level `k`.
    pub fn mean(&self, k: usize) -> f64 {
        2.0 / self.variances[k]
    }
}
