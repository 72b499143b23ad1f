//! Upper bounds on classifier accuracy under distribution shift.
//!
//! A classifier with accuracy `p` on `D` and `q` on the part of `D*` not
//! covered by `D` cannot exceed `(p − q)·η + q` on `D*`, where `η` is the
//! overlap between `D` and `D*`. The detector score upper-bounds `η`, which
//! gives a computable bound.

use serde::{Deserialize, Serialize};

use crate::detector::{compute_bound, fit, ScoreReport};
use crate::error::{Error, Result};
use crate::geometry::{check_dim, FeatureMatrix, FeatureVector, NormKind};

/// Slack allowed between measured accuracy and the bound.
pub const SAMPLING_SLACK: f64 = 0.02;

fn unit(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::range(name, v, "[0, 1]"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBoundInput {
    pub p: f64,
    pub q: f64,
    pub overlap_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// `(p − q)·clamp(overlap_bound, 0, 1) + q`.
pub fn accuracy_upper_bound(p: f64, q: f64, overlap_bound: f64) -> Result<f64> {
    unit("p", p)?;
    unit("q", q)?;
    if !(-0.5..=1.0).contains(&overlap_bound) {
        return Err(Error::range("overlap_bound", overlap_bound, "[-0.5, 1]"));
    }
    Ok((p - q) * overlap_bound.clamp(0.0, 1.0) + q)
}

impl AccuracyBoundInput {
    pub fn bound(&self) -> Result<f64> {
        if let Some(s) = self.sigma {
            unit("sigma", s)?;
        }
        accuracy_upper_bound(self.p, self.q, self.overlap_bound)
    }
}

/// Bound for a test set mixing a fraction `sigma` of clean samples with
/// poisoned samples the model always gets wrong:
/// `p·(1 − (1 − σ)·delta_mu_term − (1 − σ)·shell_term)`.
pub fn backdoor_mixture_bound(p: f64, sigma: f64, delta_mu_term: f64, shell_term: f64) -> Result<f64> {
    unit("p", p)?;
    unit("sigma", sigma)?;
    unit("delta_mu_term", delta_mu_term)?;
    unit("shell_term", shell_term)?;
    Ok(p * (1.0 - (1.0 - sigma) * delta_mu_term - (1.0 - sigma) * shell_term))
}

/// A deterministic label function.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> usize;
}

impl<F: Fn(&[f64]) -> usize> Classifier for F {
    fn predict(&self, x: &[f64]) -> usize {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub samples: FeatureMatrix,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(samples: FeatureMatrix, labels: Vec<usize>) -> Result<Self> {
        if samples.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.rows(),
                found: labels.len(),
            });
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("labeled set has no samples"));
        }
        Ok(Self { samples, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` samples followed by the first `m` samples of `other`.
    pub fn mix(&self, n: usize, other: &LabeledSet, m: usize) -> Result<LabeledSet> {
        let a: Vec<usize> = (0..n.min(self.len())).collect();
        let b: Vec<usize> = (0..m.min(other.len())).collect();
        let samples = self.samples.select(&a).concat(&other.samples.select(&b))?;
        let labels = a
            .iter()
            .map(|&i| self.labels[i])
            .chain(b.iter().map(|&i| other.labels[i]))
            .collect();
        LabeledSet::new(samples, labels)
    }
}

/// Fraction of samples the classifier labels correctly.
pub fn accuracy(classifier: &impl Classifier, set: &LabeledSet) -> f64 {
    let correct = set
        .samples
        .iter_rows()
        .zip(&set.labels)
        .filter(|(x, &y)| classifier.predict(x) == y)
        .count();
    correct as f64 / set.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    pub k: usize,
    pub norm_kind: NormKind,
    pub center: Option<FeatureVector>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            k: crate::detector::DEFAULT_K,
            norm_kind: NormKind::L2,
            center: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub acc: f64,
    pub p: f64,
    pub q: f64,
    pub overlap_bound: f64,
    pub bound: f64,
    pub holds: bool,
}

fn shift_report(d: &FeatureMatrix, dstar: &FeatureMatrix, config: &BoundConfig) -> Result<ScoreReport> {
    check_dim(d.dim(), dstar.dim())?;
    let summary = fit(d, config.k, config.norm_kind, config.center.as_ref())?;
    compute_bound(dstar, &summary)
}

/// Measures accuracy on `dstar` and checks it against the bound built from
/// `d` and `dstar`.
///
/// `p` is measured on `d`. `q` is measured on `novel`, samples from the part
/// of `dstar` outside `d`; without it `q` is taken as 0.
pub fn verify_bound_empirically(
    classifier: &impl Classifier,
    d: &LabeledSet,
    dstar: &LabeledSet,
    novel: Option<&LabeledSet>,
    config: &BoundConfig,
) -> Result<VerificationReport> {
    let p = accuracy(classifier, d);
    let q = novel.map_or(0.0, |n| accuracy(classifier, n));
    let acc = accuracy(classifier, dstar);
    let overlap_bound = shift_report(&d.samples, &dstar.samples, config)?.score;
    let bound = accuracy_upper_bound(p, q, overlap_bound)?;
    Ok(VerificationReport {
        acc,
        p,
        q,
        overlap_bound,
        bound,
        holds: acc <= bound + SAMPLING_SLACK,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub acc: f64,
    pub p: f64,
    pub q: f64,
    pub mixture_bound: f64,
    pub backdoor_bound: f64,
    pub holds: bool,
}

/// Evenly spaced clean ratios `0, 1/(n−1), …, 1`.
pub fn sigma_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Sweeps the clean ratio of a test set built from `clean_test` and
/// `poisoned`, checking measured accuracy against both the general bound
/// (overlap measured against the mixture) and the backdoor bound (terms
/// measured against the poisoned set alone).
///
/// `clean_train` provides the fitted distribution and `p`; accuracy on
/// `poisoned` provides `q`.
pub fn sigma_sweep(
    classifier: &impl Classifier,
    clean_train: &LabeledSet,
    clean_test: &LabeledSet,
    poisoned: &LabeledSet,
    sigmas: &[f64],
    config: &BoundConfig,
) -> Result<Vec<SweepPoint>> {
    let n = clean_test.len().min(poisoned.len());
    let p = accuracy(classifier, clean_train);
    let q = accuracy(classifier, poisoned);
    let summary = fit(&clean_train.samples, config.k, config.norm_kind, config.center.as_ref())?;
    let poison_terms = compute_bound(&poisoned.samples, &summary)?;
    sigmas
        .iter()
        .map(|&sigma| {
            unit("sigma", sigma)?;
            let n_clean = (sigma * n as f64).round() as usize;
            let test = clean_test.mix(n_clean, poisoned, n - n_clean)?;
            let acc = accuracy(classifier, &test);
            let overlap = compute_bound(&test.samples, &summary)?.score;
            let mixture_bound = accuracy_upper_bound(p, q, overlap)?;
            let backdoor_bound = backdoor_mixture_bound(
                p,
                sigma,
                poison_terms.delta_mu_term,
                poison_terms.shell_term,
            )?;
            Ok(SweepPoint {
                sigma,
                acc,
                p,
                q,
                mixture_bound,
                backdoor_bound,
                holds: acc <= mixture_bound + SAMPLING_SLACK && acc <= backdoor_bound + SAMPLING_SLACK,
            })
        })
        .collect()
}
