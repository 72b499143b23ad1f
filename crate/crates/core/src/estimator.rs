//! Overlap-index estimation between two sample sets, plus reference oracles.
//!
//! [`estimate_oi`] is the sample-based estimator. [`cohen_d_oi`] is the
//! Gaussian-assumption baseline. The two oracles integrate known densities
//! directly and serve as ground truth in tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geometry::{check_dim, diff_norm, norm_slice, FeatureMatrix, NormKind, ShellPartition};
use crate::synth::Synthetic;

pub const DEFAULT_GRID_POINTS: usize = 100_000;
pub const DEFAULT_MC_DRAWS: usize = 1_000_000;
const MC_BLOCK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EtaBarPrime,
    CohenD,
    OracleGrid,
    OracleMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OiEstimate {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_prime: Option<f64>,
    pub method: Method,
}

/// Condition functions used by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionFamily {
    /// `1{‖x‖ ≤ r_j}`
    #[default]
    Balls,
    /// `1{r_{j−1} ≤ ‖x‖ < r_j}`, as in the detector.
    Shells,
}

impl std::str::FromStr for ConditionFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "balls" => Ok(ConditionFamily::Balls),
            "shells" => Ok(ConditionFamily::Shells),
            other => Err(format!("unknown condition family `{other}` (expected balls or shells)")),
        }
    }
}

/// Estimates the overlap index of the distributions behind `a` and `b`
/// using cumulative-ball condition functions.
pub fn estimate_oi(
    a: &FeatureMatrix,
    b: &FeatureMatrix,
    k: usize,
    norm_kind: NormKind,
    center_at_merged_mean: bool,
) -> Result<OiEstimate> {
    estimate_oi_with(a, b, k, norm_kind, center_at_merged_mean, ConditionFamily::Balls)
}

pub fn estimate_oi_with(
    a: &FeatureMatrix,
    b: &FeatureMatrix,
    k: usize,
    norm_kind: NormKind,
    center_at_merged_mean: bool,
    family: ConditionFamily,
) -> Result<OiEstimate> {
    check_dim(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("both sample sets must be non-empty"));
    }
    if k == 0 {
        return Err(Error::range("k", 0.0, "[1, ∞)"));
    }
    let merged = a.concat(b)?;
    let merged = if center_at_merged_mean {
        merged.centered(&merged.mean()?)?
    } else {
        merged
    };
    let norms: Vec<f64> = merged
        .iter_rows()
        .map(|r| norm_slice(r, norm_kind))
        .collect();
    let na = a.rows();
    let (norms_a, norms_b) = norms.split_at(na);

    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let r_prime = sorted[(sorted.len() - 1) / 2];
    let r_b = sorted[sorted.len() - 1];
    if r_prime <= 0.0 {
        return Err(Error::AllZeroNorms);
    }

    let mean_a = FeatureMatrix::from_flat(a.dim(), merged.as_flat()[..na * a.dim()].to_vec())?.mean()?;
    let mean_b = FeatureMatrix::from_flat(a.dim(), merged.as_flat()[na * a.dim()..].to_vec())?.mean()?;
    let delta_mu = diff_norm(&mean_a, &mean_b, norm_kind);

    let partition = ShellPartition::new(k, r_b)?;
    let best = match family {
        ConditionFamily::Balls => ball_term(&partition, &sorted, norms_a, norms_b),
        ConditionFamily::Shells => shell_term(&partition, norms_a, norms_b),
    };
    let value = (1.0 - delta_mu / (2.0 * r_prime) - best / (2.0 * r_prime)).max(0.0);
    Ok(OiEstimate {
        value,
        r_prime: Some(r_prime),
        method: Method::EtaBarPrime,
    })
}

fn ball_term(partition: &ShellPartition, sorted: &[f64], norms_a: &[f64], norms_b: &[f64]) -> f64 {
    let mut sa = norms_a.to_vec();
    let mut sb = norms_b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (ma, mb) = (sa.len() as f64, sb.len() as f64);
    let r_b = partition.r_b();
    let mut best = 0.0f64;
    for &r in partition.radii() {
        let ca = sa.partition_point(|&v| v <= r);
        let cb = sb.partition_point(|&v| v <= r);
        let inside = sorted.partition_point(|&v| v <= r);
        let r_a = if inside > 0 { sorted[inside - 1] } else { 0.0 };
        best = best.max((r_b - r_a) * (ca as f64 / ma - cb as f64 / mb).abs());
    }
    best
}

fn shell_term(partition: &ShellPartition, norms_a: &[f64], norms_b: &[f64]) -> f64 {
    let k = partition.k();
    let mut ca = vec![0usize; k];
    let mut cb = vec![0usize; k];
    let mut max_norm = vec![0.0f64; k];
    for (norms, counts) in [(norms_a, &mut ca), (norms_b, &mut cb)] {
        for &r in norms {
            let j = partition
                .index_of_norm(r)
                .expect("r_B bounds every merged norm");
            counts[j] += 1;
            max_norm[j] = max_norm[j].max(r);
        }
    }
    let (ma, mb) = (norms_a.len() as f64, norms_b.len() as f64);
    let r_b = partition.r_b();
    (0..k)
        .map(|j| (r_b - max_norm[j]) * (ca[j] as f64 / ma - cb[j] as f64 / mb).abs())
        .fold(0.0, f64::max)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `2Φ(−|μ_a − μ_b| / (2σ))`. With `σ = 0` the estimate is 1 for equal means
/// and undefined otherwise.
pub fn cohen_oi_from_stats(mean_a: f64, mean_b: f64, sigma: f64) -> Result<f64> {
    let gap = (mean_a - mean_b).abs();
    if sigma == 0.0 {
        return if gap == 0.0 { Ok(1.0) } else { Err(Error::ZeroVariance) };
    }
    Ok(2.0 * std_normal_cdf(-gap / (2.0 * sigma)))
}

/// Cohen's-d overlap estimate with pooled standard deviation.
///
/// One-dimensional data is used as is. Higher-dimensional data is first
/// centered at the merged mean and reduced to Euclidean norms.
pub fn cohen_d_oi(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<OiEstimate> {
    check_dim(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("both sample sets must be non-empty"));
    }
    let (xa, xb): (Vec<f64>, Vec<f64>) = if a.dim() == 1 {
        (a.as_flat().to_vec(), b.as_flat().to_vec())
    } else {
        let merged = a.concat(b)?;
        let c = merged.mean()?;
        let project = |m: &FeatureMatrix| {
            m.iter_rows()
                .map(|r| diff_norm(r, &c, NormKind::L2))
                .collect::<Vec<_>>()
        };
        (project(a), project(b))
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    let (ma, mb) = (mean(&xa), mean(&xb));
    let dof = xa.len() + xb.len() - 2;
    let sigma = if dof == 0 {
        0.0
    } else {
        ((ss(&xa, ma) + ss(&xb, mb)) / dof as f64).sqrt()
    };
    Ok(OiEstimate {
        value: cohen_oi_from_stats(ma, mb, sigma)?,
        r_prime: None,
        method: Method::CohenD,
    })
}

/// Composite-trapezoid integral of `min(f, g)` over `[lo, hi]`.
///
/// Each density must integrate to 1 within `1e−3` on the same grid.
pub fn oi_oracle_grid_1d(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_points: usize,
) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::range("grid_points", grid_points as f64, "[2, ∞)"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::range("grid span", hi - lo, "(0, ∞)"));
    }
    let h = (hi - lo) / (grid_points - 1) as f64;
    let (mut mass_f, mut mass_g, mut overlap) = (0.0, 0.0, 0.0);
    for i in 0..grid_points {
        let x = if i == grid_points - 1 { hi } else { lo + h * i as f64 };
        let w = if i == 0 || i == grid_points - 1 { 0.5 * h } else { h };
        let (fx, gx) = (f(x), g(x));
        mass_f += w * fx;
        mass_g += w * gx;
        overlap += w * fx.min(gx);
    }
    for (which, mass) in [("f", mass_f), ("g", mass_g)] {
        if (mass - 1.0).abs() > 1e-3 {
            return Err(Error::NotNormalized { which, mass });
        }
    }
    Ok(overlap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of `E_{x∼P}[min(1, f_Q(x)/f_P(x))]`.
///
/// Draws are split into fixed blocks, block `i` using stream `i` of a ChaCha
/// generator seeded with `seed`. Blocks run in parallel and are combined in
/// block order, so the result does not depend on the thread count.
pub fn oi_oracle_mc<S, FP, FQ>(
    sampler: S,
    dim: usize,
    density_p: FP,
    density_q: FQ,
    n_draws: usize,
    seed: u64,
) -> Result<McEstimate>
where
    S: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
    FP: Fn(&[f64]) -> f64 + Sync,
    FQ: Fn(&[f64]) -> f64 + Sync,
{
    if n_draws == 0 {
        return Err(Error::range("n_draws", 0.0, "[1, ∞)"));
    }
    let blocks = n_draws.div_ceil(MC_BLOCK);
    let partial: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let len = MC_BLOCK.min(n_draws - i * MC_BLOCK);
            let mut x = vec![0.0; dim];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                sampler(&mut rng, &mut x);
                let fp = density_p(&x);
                let fq = density_q(&x);
                let w = if fp > 0.0 {
                    (fq / fp).min(1.0)
                } else if fq > 0.0 {
                    1.0
                } else {
                    0.0
                };
                s += w;
                s2 += w * w;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let n = n_draws as f64;
    let value = s / n;
    let var = if n_draws > 1 {
        ((s2 - n * value * value) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        value,
        std_error: (var / n).sqrt(),
    })
}

/// [`oi_oracle_mc`] for two synthetic distributions.
pub fn oi_oracle_mc_synth(
    p: &Synthetic,
    q: &Synthetic,
    n_draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_dim(p.dim(), q.dim())?;
    oi_oracle_mc(
        |rng, x| p.draw_into(rng, x),
        p.dim(),
        |x| p.density_unchecked(x),
        |x| q.density_unchecked(x),
        n_draws,
        seed,
    )
}
