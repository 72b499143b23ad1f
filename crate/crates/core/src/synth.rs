//! Seeded synthetic distributions with matching density evaluators.
//!
//! A [`SyntheticSpec`] is plain data (and round-trips through JSON); a
//! [`Synthetic`] is the validated, ready-to-sample form of it.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::geometry::{check_dim, FeatureMatrix};

fn default_radius() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on the box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Diagonal Gaussian restricted to the ball `‖x − mean‖ ≤ radius`.
    TruncGaussBall {
        mean: Vec<f64>,
        std: Vec<f64>,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// Density `1 + sin(2πωx)` on `[0, 1]`.
    #[serde(rename = "sine_1d")]
    Sine1d { omega: u32 },
    /// `(1 − ε)·base + ε·contaminant`.
    HuberMixture {
        base: Box<Distribution>,
        contaminant: Box<Distribution>,
        epsilon: f64,
    },
    #[serde(rename = "gauss_1d")]
    Gauss1d { mean: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub dist: Distribution,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(dist: Distribution, seed: u64) -> Self {
        Self { dist, seed }
    }
}

impl Distribution {
    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Distribution::UniformBox { lo, hi }
    }

    pub fn unit_interval() -> Self {
        Distribution::UniformBox {
            lo: vec![0.0],
            hi: vec![1.0],
        }
    }

    pub fn trunc_gauss_ball(mean: Vec<f64>, std: Vec<f64>, radius: f64) -> Self {
        Distribution::TruncGaussBall { mean, std, radius }
    }

    pub fn sine(omega: u32) -> Self {
        Distribution::Sine1d { omega }
    }

    pub fn gauss(mean: f64, sigma: f64) -> Self {
        Distribution::Gauss1d { mean, sigma }
    }

    pub fn huber(base: Distribution, contaminant: Distribution, epsilon: f64) -> Self {
        Distribution::HuberMixture {
            base: Box::new(base),
            contaminant: Box::new(contaminant),
            epsilon,
        }
    }
}

#[derive(Debug)]
enum Node {
    Uniform {
        lo: Vec<f64>,
        hi: Vec<f64>,
        inv_volume: f64,
    },
    TruncGauss {
        mean: Vec<f64>,
        std: Vec<f64>,
        radius: f64,
        mass: OnceLock<f64>,
    },
    Sine {
        omega: f64,
    },
    Gauss {
        mean: f64,
        sigma: f64,
    },
    Huber {
        base: Box<Node>,
        contaminant: Box<Node>,
        epsilon: f64,
    },
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::BadSpec(msg.into()))
}

fn finite(vals: &[f64]) -> bool {
    vals.iter().all(|v| v.is_finite())
}

// Draws used to estimate the ball mass of a non-isotropic truncated Gaussian.
const MASS_DRAWS: usize = 1 << 20;
const MASS_SEED: u64 = 0x6d61_7373;

impl Node {
    fn compile(d: &Distribution) -> Result<Self> {
        match d {
            Distribution::UniformBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad("uniform_box needs non-empty lo and hi of equal length");
                }
                if !finite(lo) || !finite(hi) || lo.iter().zip(hi).any(|(l, h)| l >= h) {
                    return bad("uniform_box needs finite bounds with lo < hi");
                }
                let volume: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
                Ok(Node::Uniform {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    inv_volume: 1.0 / volume,
                })
            }
            Distribution::TruncGaussBall { mean, std, radius } => {
                if mean.is_empty() || mean.len() != std.len() {
                    return bad("trunc_gauss_ball needs non-empty mean and std of equal length");
                }
                if !finite(mean) || !finite(std) || std.iter().any(|s| *s <= 0.0) {
                    return bad("trunc_gauss_ball needs finite values and positive std");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("trunc_gauss_ball radius must be positive");
                }
                Ok(Node::TruncGauss {
                    mean: mean.clone(),
                    std: std.clone(),
                    radius: *radius,
                    mass: OnceLock::new(),
                })
            }
            Distribution::Sine1d { omega } => {
                if *omega < 1 {
                    return bad("sine_1d needs omega ≥ 1");
                }
                Ok(Node::Sine {
                    omega: *omega as f64,
                })
            }
            Distribution::Gauss1d { mean, sigma } => {
                if !(mean.is_finite() && sigma.is_finite() && *sigma > 0.0) {
                    return bad("gauss_1d needs finite mean and positive sigma");
                }
                Ok(Node::Gauss {
                    mean: *mean,
                    sigma: *sigma,
                })
            }
            Distribution::HuberMixture {
                base,
                contaminant,
                epsilon,
            } => {
                if !(0.0..=1.0).contains(epsilon) {
                    return bad("huber_mixture epsilon must lie in [0, 1]");
                }
                let base = Node::compile(base)?;
                let contaminant = Node::compile(contaminant)?;
                if base.dim() != contaminant.dim() {
                    return bad("huber_mixture components differ in dimension");
                }
                Ok(Node::Huber {
                    base: Box::new(base),
                    contaminant: Box::new(contaminant),
                    epsilon: *epsilon,
                })
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Node::Uniform { lo, .. } => lo.len(),
            Node::TruncGauss { mean, .. } => mean.len(),
            Node::Sine { .. } | Node::Gauss { .. } => 1,
            Node::Huber { base, .. } => base.dim(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Node::Uniform { lo, hi, .. } => {
                for ((o, l), h) in out.iter_mut().zip(lo).zip(hi) {
                    *o = l + (h - l) * rng.random::<f64>();
                }
            }
            Node::TruncGauss {
                mean, std, radius, ..
            } => loop {
                let mut sq = 0.0;
                for ((o, m), s) in out.iter_mut().zip(mean).zip(std) {
                    let z = s * rng.sample::<f64, _>(StandardNormal);
                    sq += z * z;
                    *o = m + z;
                }
                if sq.sqrt() <= *radius {
                    break;
                }
            },
            Node::Sine { omega } => out[0] = sine_inverse_cdf(rng.random(), *omega),
            Node::Gauss { mean, sigma } => {
                out[0] = mean + sigma * rng.sample::<f64, _>(StandardNormal)
            }
            Node::Huber {
                base,
                contaminant,
                epsilon,
            } => {
                if rng.random::<f64>() < *epsilon {
                    contaminant.draw(rng, out)
                } else {
                    base.draw(rng, out)
                }
            }
        }
    }

    fn density(&self, x: &[f64]) -> f64 {
        match self {
            Node::Uniform { lo, hi, inv_volume } => {
                let inside = x.iter().zip(lo).zip(hi).all(|((v, l), h)| l <= v && v <= h);
                if inside {
                    *inv_volume
                } else {
                    0.0
                }
            }
            Node::TruncGauss {
                mean,
                std,
                radius,
                mass,
            } => {
                let r = x.iter().zip(mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>().sqrt();
                if r > *radius {
                    return 0.0;
                }
                let log_pdf: f64 = x
                    .iter()
                    .zip(mean)
                    .zip(std)
                    .map(|((v, m), s)| {
                        let z = (v - m) / s;
                        -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
                    })
                    .sum();
                log_pdf.exp() / mass.get_or_init(|| ball_mass(std, *radius))
            }
            Node::Sine { omega } => {
                let v = x[0];
                if (0.0..=1.0).contains(&v) {
                    1.0 + (2.0 * PI * omega * v).sin()
                } else {
                    0.0
                }
            }
            Node::Gauss { mean, sigma } => {
                let z = (x[0] - mean) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            Node::Huber {
                base,
                contaminant,
                epsilon,
            } => (1.0 - epsilon) * base.density(x) + epsilon * contaminant.density(x),
        }
    }
}

/// Probability that a zero-mean diagonal Gaussian lands in the ball of
/// `radius`. Closed form when isotropic, seeded Monte Carlo otherwise.
fn ball_mass(std: &[f64], radius: f64) -> f64 {
    let s0 = std[0];
    if std.iter().all(|&s| s == s0) {
        let n = std.len() as f64;
        return gamma_lr(n / 2.0, radius * radius / (2.0 * s0 * s0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(MASS_SEED);
    let r2 = radius * radius;
    let mut hits = 0usize;
    for _ in 0..MASS_DRAWS {
        let sq: f64 = std
            .iter()
            .map(|s| {
                let z = s * rng.sample::<f64, _>(StandardNormal);
                z * z
            })
            .sum();
        hits += (sq <= r2) as usize;
    }
    hits as f64 / MASS_DRAWS as f64
}

/// CDF of the density `1 + sin(2πωx)` on `[0, 1]`.
pub fn sine_cdf(x: f64, omega: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x + (1.0 - (2.0 * PI * omega * x).cos()) / (2.0 * PI * omega)
}

fn sine_inverse_cdf(u: f64, omega: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if sine_cdf(mid, omega) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A validated distribution, ready for sampling and density evaluation.
#[derive(Debug)]
pub struct Synthetic {
    node: Node,
    seed: u64,
}

impl Synthetic {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        Ok(Self {
            node: Node::compile(&spec.dist)?,
            seed: spec.seed,
        })
    }

    pub fn from_dist(dist: &Distribution, seed: u64) -> Result<Self> {
        Self::new(&SyntheticSpec::new(dist.clone(), seed))
    }

    pub fn dim(&self) -> usize {
        self.node.dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `count` draws using the configured seed.
    pub fn sample(&self, count: usize) -> Result<FeatureMatrix> {
        self.sample_with_seed(count, self.seed)
    }

    /// `count` draws from a generator seeded with `seed`.
    ///
    /// For a Huber mixture the component choice, the base draws, and the
    /// contaminant draws use separate streams, so `ε = 0` reproduces the base
    /// distribution's own sample for the same seed.
    pub fn sample_with_seed(&self, count: usize, seed: u64) -> Result<FeatureMatrix> {
        if count == 0 {
            return bad("sample count must be at least 1");
        }
        let n = self.dim();
        let mut data = vec![0.0; n * count];
        match &self.node {
            Node::Huber {
                base,
                contaminant,
                epsilon,
            } => {
                let mut base_rng = ChaCha8Rng::seed_from_u64(seed);
                let mut choice_rng = base_rng.clone();
                choice_rng.set_stream(1);
                let mut cont_rng = base_rng.clone();
                cont_rng.set_stream(2);
                for row in data.chunks_exact_mut(n) {
                    if choice_rng.random::<f64>() < *epsilon {
                        contaminant.draw(&mut cont_rng, row);
                    } else {
                        base.draw(&mut base_rng, row);
                    }
                }
            }
            node => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for row in data.chunks_exact_mut(n) {
                    node.draw(&mut rng, row);
                }
            }
        }
        FeatureMatrix::from_flat(n, data)
    }

    /// One draw written into `out`, which must have length `dim()`.
    pub fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.node.draw(rng, out)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.node.density(x))
    }

    /// Density without the dimension check; `x` must have length `dim()`.
    pub fn density_unchecked(&self, x: &[f64]) -> f64 {
        self.node.density(x)
    }
}

pub fn sample(spec: &SyntheticSpec, count: usize) -> Result<FeatureMatrix> {
    Synthetic::new(spec)?.sample(count)
}

pub fn density(spec: &SyntheticSpec, x: &[f64]) -> Result<f64> {
    Synthetic::new(spec)?.density(x)
}
