//! Per-sample scoring latency measurements.

use std::hint::black_box;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detector::{fit, score, IdSummary};
use crate::error::{Error, Result};
use crate::geometry::{FeatureMatrix, FeatureVector, NormKind};
use crate::io::summary_to_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub ks: Vec<usize>,
    /// `k` used for the dimension sweep.
    pub dim_sweep_k: usize,
    /// Dimension used for the `k` sweep.
    pub k_sweep_dim: usize,
    /// Timed calls per cell.
    pub samples: usize,
    pub warmup: usize,
    /// Rows in the fitted ID set.
    pub fit_rows: usize,
    /// Distinct probe vectors, cycled through during timing.
    pub probes: usize,
    pub norm_kind: NormKind,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![10, 100, 500, 1000, 2000],
            ks: vec![100, 200, 500, 1000],
            dim_sweep_k: 100,
            k_sweep_dim: 100,
            samples: 10_000,
            warmup: 1_000,
            fit_rows: 1_000,
            probes: 256,
            norm_kind: NormKind::L2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dim: usize,
    pub k: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub dim_sweep: Vec<Cell>,
    pub k_sweep: Vec<Cell>,
    /// Largest over smallest median latency across the dimension sweep.
    pub dim_ratio: f64,
    /// Median latency against `k`.
    pub k_fit: LinearFit,
}

/// Least-squares line through `(xs, ys)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput("a line fit needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, dim: usize, shift: f64) -> Result<FeatureMatrix> {
    let data = (0..rows * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            shift + z
        })
        .collect();
    FeatureMatrix::from_flat(dim, data)
}

/// Fitted summary and probe vectors for one benchmark cell.
pub fn fixture(dim: usize, k: usize, config: &BenchConfig) -> Result<(IdSummary, Vec<FeatureVector>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((dim as u64) << 20) ^ k as u64);
    let id = gaussian(&mut rng, config.fit_rows, dim, 0.0)?;
    let summary = fit(&id, k, config.norm_kind, None)?;
    // half the probes look like ID data, half are shifted away from it
    let near = gaussian(&mut rng, config.probes.div_ceil(2), dim, 0.0)?;
    let far = gaussian(&mut rng, config.probes / 2, dim, 1.0)?;
    let probes = near
        .iter_rows()
        .chain(far.iter_rows())
        .map(|r| FeatureVector::new(r.to_vec()))
        .collect::<Result<_>>()?;
    Ok((summary, probes))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Times `config.samples` single-sample `score` calls after a warm-up.
pub fn time_cell(dim: usize, k: usize, config: &BenchConfig) -> Result<Cell> {
    if config.samples == 0 || config.probes == 0 {
        return Err(Error::EmptyInput("benchmark needs samples and probes"));
    }
    let (summary, probes) = fixture(dim, k, config)?;
    for i in 0..config.warmup {
        black_box(score(black_box(&probes[i % probes.len()]), &summary)?);
    }
    let mut ms = Vec::with_capacity(config.samples);
    for i in 0..config.samples {
        let x = &probes[i % probes.len()];
        let t0 = Instant::now();
        let r = score(black_box(x), &summary);
        let dt = t0.elapsed();
        black_box(r?);
        ms.push(dt.as_secs_f64() * 1e3);
    }
    let mean_ms = ms.iter().sum::<f64>() / ms.len() as f64;
    ms.sort_by(f64::total_cmp);
    Ok(Cell {
        dim,
        k,
        median_ms: percentile(&ms, 0.5),
        p95_ms: percentile(&ms, 0.95),
        mean_ms,
        samples: config.samples,
    })
}

pub fn run(config: &BenchConfig) -> Result<BenchReport> {
    let dim_sweep = config
        .dims
        .iter()
        .map(|&d| time_cell(d, config.dim_sweep_k, config))
        .collect::<Result<Vec<_>>>()?;
    let k_sweep = config
        .ks
        .iter()
        .map(|&k| time_cell(config.k_sweep_dim, k, config))
        .collect::<Result<Vec<_>>>()?;
    let medians = dim_sweep.iter().map(|c| c.median_ms);
    let hi = medians.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = medians.fold(f64::INFINITY, f64::min);
    let xs: Vec<f64> = k_sweep.iter().map(|c| c.k as f64).collect();
    let ys: Vec<f64> = k_sweep.iter().map(|c| c.median_ms).collect();
    let k_fit = if xs.len() >= 2 {
        linear_fit(&xs, &ys)?
    } else {
        LinearFit {
            slope: 0.0,
            intercept: ys.first().copied().unwrap_or(0.0),
            r_squared: 1.0,
        }
    };
    Ok(BenchReport {
        config: config.clone(),
        dim_sweep,
        k_sweep,
        dim_ratio: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        k_fit,
    })
}

/// Size in bytes of the serialized summary of `rows` Gaussian samples.
pub fn summary_bytes(dim: usize, k: usize, rows: usize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = gaussian(&mut rng, rows, dim, 0.0)?;
    Ok(summary_to_json(&fit(&id, k, NormKind::L2, None)?).len())
}
