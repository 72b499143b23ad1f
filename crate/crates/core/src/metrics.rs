//! Detection-quality metrics over ID and OOD score sets.
//!
//! Scores follow the detector convention: higher means more in-distribution.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which class AUPR treats as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positive {
    #[default]
    Ood,
    Id,
}

impl std::str::FromStr for Positive {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ood" => Ok(Positive::Ood),
            "id" => Ok(Positive::Id),
            other => Err(format!("unknown positive class `{other}` (expected ood or id)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub auroc: f64,
    pub tpr95: f64,
    pub aupr: f64,
    pub threshold_at_95: f64,
    pub n_id: usize,
    pub n_ood: usize,
}

// Inputs up to this many pairs go through the direct double loop.
const PAIRWISE_LIMIT: usize = 1 << 16;

fn check(which: &'static str, scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput(which));
    }
    if let Some((i, &v)) = scores.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i,
            col: 0,
            value: v,
        });
    }
    Ok(())
}

fn check_both(id: &[f64], ood: &[f64]) -> Result<()> {
    check("no ID scores", id)?;
    check("no OOD scores", ood)
}

fn from_twice_wins(twice_wins: u128, n: usize, m: usize) -> f64 {
    twice_wins as f64 / (2 * n as u128 * m as u128) as f64
}

/// AUROC by comparing every ID/OOD pair.
pub fn auroc_pairwise(id: &[f64], ood: &[f64]) -> Result<f64> {
    check_both(id, ood)?;
    let mut twice_wins: u128 = 0;
    for &a in id {
        for &b in ood {
            twice_wins += match a.partial_cmp(&b) {
                Some(Ordering::Greater) => 2,
                Some(Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(from_twice_wins(twice_wins, id.len(), ood.len()))
}

/// AUROC by sorting the OOD scores and binary-searching each ID score.
pub fn auroc_sorted(id: &[f64], ood: &[f64]) -> Result<f64> {
    check_both(id, ood)?;
    let sorted = sorted_copy(ood);
    let mut twice_wins: u128 = 0;
    for &a in id {
        let below = sorted.partition_point(|&b| b < a);
        let not_above = sorted.partition_point(|&b| b <= a);
        twice_wins += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(from_twice_wins(twice_wins, id.len(), ood.len()))
}

/// Probability that a random ID score exceeds a random OOD score, ties
/// counting one half.
pub fn auroc(id: &[f64], ood: &[f64]) -> Result<f64> {
    if id.len().saturating_mul(ood.len()) <= PAIRWISE_LIMIT {
        auroc_pairwise(id, ood)
    } else {
        auroc_sorted(id, ood)
    }
}

fn sorted_copy(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Threshold keeping at least 95% of ID scores at or above it, and the
/// fraction of OOD scores strictly below it.
///
/// The threshold is the largest ID score that still keeps 95% of the ID set,
/// so moving it up to the next distinct ID score would drop below 95%.
/// Returns `(tpr95, threshold)`.
pub fn tpr95(id: &[f64], ood: &[f64]) -> Result<(f64, f64)> {
    check_both(id, ood)?;
    let sorted = sorted_copy(id);
    let n = sorted.len();
    // keeping i.. retains n − i samples; need (n − i)·100 ≥ 95·n
    let t = sorted[(5 * n) / 100];
    let detected = ood.iter().filter(|&&s| s < t).count();
    Ok((detected as f64 / ood.len() as f64, t))
}

/// Step-wise average precision with the chosen positive class.
///
/// OOD-positive ranks by negated confidence, so low scores come first.
pub fn aupr(id: &[f64], ood: &[f64], positive: Positive) -> Result<f64> {
    check_both(id, ood)?;
    let mut ranked: Vec<(f64, bool)> = match positive {
        Positive::Ood => ood
            .iter()
            .map(|&s| (-s, true))
            .chain(id.iter().map(|&s| (-s, false)))
            .collect(),
        Positive::Id => id
            .iter()
            .map(|&s| (s, true))
            .chain(ood.iter().map(|&s| (s, false)))
            .collect(),
    };
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total_pos = ranked.iter().filter(|r| r.1).count() as f64;

    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < ranked.len() {
        let v = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == v {
            tp += ranked[i].1 as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / total_pos;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

pub fn evaluate(id: &[f64], ood: &[f64], positive: Positive) -> Result<MetricsReport> {
    let (tpr95, threshold_at_95) = tpr95(id, ood)?;
    Ok(MetricsReport {
        auroc: auroc(id, ood)?,
        tpr95,
        aupr: aupr(id, ood, positive)?,
        threshold_at_95,
        n_id: id.len(),
        n_ood: ood.len(),
    })
}

/// Equal-width histogram counts over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn histogram(scores: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::range("bins", 0.0, "[1, ∞)"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::range("histogram range", hi - lo, "finite and non-negative"));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for &s in scores {
        if s < lo || s > hi {
            continue;
        }
        let b = if width > 0.0 {
            (((s - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}
