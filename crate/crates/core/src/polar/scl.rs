//! CRC-aided successive cancellation list decoding.
//!
//! The list is carried through the recursion node by node: each subtree
//! receives the LLR vectors of the incoming paths and returns its surviving
//! paths with a back-pointer to the incoming path they extend. Copies are
//! therefore proportional to the subtree size and no path ever shares
//! mutable state.

use super::sc::{f_op, g_op};
use super::{crc_check, PolarCodeSpec};
use crate::error::{invalid, Result};

/// One surviving decoding path.
#[derive(Debug, Clone, PartialEq)]
pub struct SclCandidate {
    pub u_hat: Vec<u8>,
    /// Accumulated penalty; smaller is more likely.
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SclOutput {
    pub u_hat: Vec<u8>,
    pub message: Vec<u8>,
    /// False when the code has a CRC and no surviving path satisfies it.
    pub crc_ok: bool,
}

/// Runs SCL and returns every surviving path, most likely first.
///
/// Ties keep their enumeration order (lower path index first), so results are
/// deterministic.
pub fn scl_candidates(
    spec: &PolarCodeSpec,
    llrs: &[f64],
    list_size: usize,
) -> Result<Vec<SclCandidate>> {
    let n = spec.length();
    if llrs.len() != n {
        return invalid(format!("expected {n} LLRs, got {}", llrs.len()));
    }
    if list_size == 0 {
        return invalid("list size must be at least 1");
    }
    let decoded = spec.decoded_mask();
    let paths = node(llrs, &[0.0], &decoded, n, list_size);
    let mut out: Vec<SclCandidate> = (0..paths.metric.len())
        .map(|p| SclCandidate {
            u_hat: paths.u[p * n..(p + 1) * n].to_vec(),
            metric: paths.metric[p],
        })
        .collect();
    out.sort_by(|a, b| a.metric.total_cmp(&b.metric));
    Ok(out)
}

/// SCL decoding. With a CRC the most likely CRC-passing path is returned,
/// otherwise the most likely path.
pub fn scl_decode(spec: &PolarCodeSpec, llrs: &[f64], list_size: usize) -> Result<SclOutput> {
    let candidates = scl_candidates(spec, llrs, list_size)?;
    let check = spec.crc_length() > 0;
    let chosen = candidates
        .iter()
        .find(|c| !check || crc_check(&spec.extract_info(&c.u_hat)));
    let (best, crc_ok) = match chosen {
        Some(c) => (c, true),
        None => (&candidates[0], false),
    };
    Ok(SclOutput {
        message: spec.extract_info(&best.u_hat),
        u_hat: best.u_hat.clone(),
        crc_ok,
    })
}

struct Paths {
    /// Index of the incoming path each survivor extends.
    parent: Vec<usize>,
    metric: Vec<f64>,
    /// Re-encoded partial codewords, `n` bits per survivor.
    x: Vec<u8>,
    /// u-domain decisions, `n` bits per survivor.
    u: Vec<u8>,
}

#[inline]
fn penalty(llr: f64, bit: u8) -> f64 {
    if (llr < 0.0) != (bit == 1) {
        llr.abs()
    } else {
        0.0
    }
}

fn node(alpha: &[f64], metric: &[f64], decoded: &[bool], n: usize, list: usize) -> Paths {
    let p = metric.len();
    if n == 1 {
        return leaf(alpha, metric, decoded[0], list);
    }
    let h = n / 2;
    let mut child = vec![0.0; p * h];
    for q in 0..p {
        let a = &alpha[q * n..(q + 1) * n];
        for i in 0..h {
            child[q * h + i] = f_op(a[i], a[i + h]);
        }
    }
    let left = node(&child, metric, &decoded[..h], h, list);
    let pl = left.metric.len();
    child.resize(pl * h, 0.0);
    for q in 0..pl {
        let a = &alpha[left.parent[q] * n..(left.parent[q] + 1) * n];
        let xl = &left.x[q * h..(q + 1) * h];
        for i in 0..h {
            child[q * h + i] = g_op(a[i], a[i + h], xl[i]);
        }
    }
    let right = node(&child, &left.metric, &decoded[h..], h, list);
    let pr = right.metric.len();
    let mut parent = Vec::with_capacity(pr);
    let mut x = vec![0u8; pr * n];
    let mut u = vec![0u8; pr * n];
    for r in 0..pr {
        let lq = right.parent[r];
        parent.push(left.parent[lq]);
        let xl = &left.x[lq * h..(lq + 1) * h];
        let xr = &right.x[r * h..(r + 1) * h];
        let out = &mut x[r * n..(r + 1) * n];
        for i in 0..h {
            out[i] = xl[i] ^ xr[i];
            out[i + h] = xr[i];
        }
        u[r * n..r * n + h].copy_from_slice(&left.u[lq * h..(lq + 1) * h]);
        u[r * n + h..(r + 1) * n].copy_from_slice(&right.u[r * h..(r + 1) * h]);
    }
    Paths {
        parent,
        metric: right.metric,
        x,
        u,
    }
}

fn leaf(alpha: &[f64], metric: &[f64], decoded: bool, list: usize) -> Paths {
    let p = metric.len();
    if !decoded {
        let metric = (0..p).map(|q| metric[q] + penalty(alpha[q], 0)).collect();
        return Paths {
            parent: (0..p).collect(),
            metric,
            x: vec![0; p],
            u: vec![0; p],
        };
    }
    let mut cand: Vec<(usize, u8, f64)> = Vec::with_capacity(2 * p);
    for q in 0..p {
        for bit in 0..2u8 {
            cand.push((q, bit, metric[q] + penalty(alpha[q], bit)));
        }
    }
    if cand.len() > list {
        // Stable: equal metrics keep enumeration order.
        cand.sort_by(|a, b| a.2.total_cmp(&b.2));
        cand.truncate(list);
    }
    Paths {
        parent: cand.iter().map(|c| c.0).collect(),
        metric: cand.iter().map(|c| c.2).collect(),
        x: cand.iter().map(|c| c.1).collect(),
        u: cand.iter().map(|c| c.1).collect(),
    }
}
