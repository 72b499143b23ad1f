//! Overlap-index upper bound used as an OOD confidence score.
//!
//! A fitted [`IdSummary`] keeps only what the bound needs from the
//! in-distribution samples: their mean, the fraction of samples in each norm
//! shell, and the largest norm seen in each shell. Scoring a candidate is then
//! one pass over the candidate's coordinates plus one pass over the `k` shells.
//!
//! For candidate set `B⁺` and fitted set `B⁻`, with `r_B` the largest norm over
//! both, the bound is
//!
//! ```text
//! η̄ = 1 − ‖μ⁺ − μ⁻‖ / (2 r_B) − max_j (r_B − r_A(j)) · |f⁺_j − f⁻_j| / (2 r_B)
//! ```
//!
//! where `f_j` are shell frequencies and `r_A(j)` is the largest norm of any
//! sample in shell `j`. Shells are frozen at fit time; a candidate outside the
//! fitted ball belongs to no shell but still widens `r_B`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    check_dim, diff_norm, norm_pair, norm_slice, FeatureMatrix, FeatureVector, NormKind,
    ShellPartition,
};

pub const DEFAULT_K: usize = 100;
pub const RECOMMENDED_K: std::ops::RangeInclusive<usize> = 50..=200;

/// Whether `k` lies in the range where the score is known to behave well.
pub fn k_in_recommended_range(k: usize) -> bool {
    RECOMMENDED_K.contains(&k)
}

/// Fitted in-distribution state.
#[derive(Debug, Clone, PartialEq)]
pub struct IdSummary {
    mean: Vec<f64>,
    partition: ShellPartition,
    shell_freq: Vec<f64>,
    shell_max_norm: Vec<f64>,
    r_b_id: f64,
    m: usize,
    norm_kind: NormKind,
    center: Option<Vec<f64>>,
}

impl IdSummary {
    /// Reassembles a summary from its stored parts, checking every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        mean: Vec<f64>,
        k: usize,
        r_b_id: f64,
        m: usize,
        shell_freq: Vec<f64>,
        shell_max_norm: Vec<f64>,
        norm_kind: NormKind,
        center: Option<Vec<f64>>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSummary(msg));
        if mean.is_empty() {
            return bad("mean vector is empty".into());
        }
        if m == 0 {
            return bad("sample count m is zero".into());
        }
        if shell_freq.len() != k || shell_max_norm.len() != k {
            return bad(format!(
                "expected {k} shell entries, found {} frequencies and {} max norms",
                shell_freq.len(),
                shell_max_norm.len()
            ));
        }
        if let Some(c) = &center {
            if c.len() != mean.len() {
                return bad(format!(
                    "center has dimension {}, mean has {}",
                    c.len(),
                    mean.len()
                ));
            }
        }
        let all = mean
            .iter()
            .chain(&shell_freq)
            .chain(&shell_max_norm)
            .chain(center.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return bad("non-finite value".into());
        }
        let partition =
            ShellPartition::new(k, r_b_id).map_err(|e| Error::InvalidSummary(e.to_string()))?;
        if shell_freq.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("shell frequency outside [0, 1]".into());
        }
        let total: f64 = shell_freq.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("shell frequencies sum to {total}"));
        }
        for (j, (&mx, &hi)) in shell_max_norm.iter().zip(partition.radii()).enumerate() {
            if mx < 0.0 || mx > hi {
                return bad(format!("shell {} max norm {mx} exceeds its radius {hi}", j + 1));
            }
        }
        Ok(Self {
            mean,
            partition,
            shell_freq,
            shell_max_norm,
            r_b_id,
            m,
            norm_kind,
            center,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn partition(&self) -> &ShellPartition {
        &self.partition
    }

    pub fn shell_freq(&self) -> &[f64] {
        &self.shell_freq
    }

    pub fn shell_max_norm(&self) -> &[f64] {
        &self.shell_max_norm
    }

    pub fn r_b_id(&self) -> f64 {
        self.r_b_id
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn center(&self) -> Option<&[f64]> {
        self.center.as_deref()
    }
}

/// One evaluation of the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub score: f64,
    /// `‖μ⁺ − μ⁻‖ / (2 r_B)`
    pub delta_mu_term: f64,
    /// `max_j s_j / (2 r_B)`
    pub shell_term: f64,
    /// One-based index of the shell attaining the maximum.
    pub best_shell: usize,
    pub r_b_effective: f64,
}

impl ScoreReport {
    /// Ablation score keeping only the mean-distance term.
    pub fn eta1(&self) -> f64 {
        1.0 - self.delta_mu_term
    }

    /// Ablation score keeping only the shell-frequency term.
    pub fn eta2(&self) -> f64 {
        1.0 - self.shell_term
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Id,
    Ood,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Id => "ID",
            Label::Ood => "OOD",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

const GRID: f64 = 4_503_599_627_370_496.0; // 2^52

// Terms live on the 2^-52 grid. Every sum and difference of grid values in
// [-1, 2] is then exact, so score = 1 − a − b and score = η₁ + η₂ − 1 agree
// to the bit.
#[inline]
fn snap(v: f64, max: f64) -> f64 {
    ((v * GRID).round() / GRID).clamp(0.0, max)
}

#[inline]
fn assemble(delta_mu: f64, best_s: f64, best: usize, r_b: f64) -> ScoreReport {
    let denom = 2.0 * r_b;
    let delta_mu_term = snap(delta_mu / denom, 1.0);
    let shell_term = snap(best_s / denom, 0.5);
    ScoreReport {
        score: 1.0 - delta_mu_term - shell_term,
        delta_mu_term,
        shell_term,
        best_shell: best + 1,
        r_b_effective: r_b,
    }
}

/// Fits the in-distribution summary.
///
/// Samples are centered by `center` (when given) before anything else; the
/// same center is applied to every candidate at scoring time.
pub fn fit(
    id_samples: &FeatureMatrix,
    k: usize,
    norm_kind: NormKind,
    center: Option<&FeatureVector>,
) -> Result<IdSummary> {
    if id_samples.is_empty() {
        return Err(Error::EmptyInput("no in-distribution samples"));
    }
    if k == 0 {
        return Err(Error::range("k", 0.0, "[1, ∞)"));
    }
    let centered;
    let samples = match center {
        Some(c) => {
            check_dim(id_samples.dim(), c.dim())?;
            centered = id_samples.centered(c.as_slice())?;
            &centered
        }
        None => id_samples,
    };
    let norms: Vec<f64> = samples
        .iter_rows()
        .map(|row| norm_slice(row, norm_kind))
        .collect();
    let r_b_id = norms.iter().copied().fold(0.0f64, f64::max);
    if r_b_id <= 0.0 {
        return Err(Error::AllZeroNorms);
    }
    let partition = ShellPartition::new(k, r_b_id)?;
    let mut counts = vec![0usize; k];
    let mut shell_max_norm = vec![0.0f64; k];
    for &r in &norms {
        let j = partition
            .index_of_norm(r)
            .expect("every fitted sample lies inside its own bounding ball");
        counts[j] += 1;
        shell_max_norm[j] = shell_max_norm[j].max(r);
    }
    let m = samples.rows();
    let mf = m as f64;
    Ok(IdSummary {
        mean: samples.mean()?,
        partition,
        shell_freq: counts.iter().map(|&c| c as f64 / mf).collect(),
        shell_max_norm,
        r_b_id,
        m,
        norm_kind,
        center: center.map(|c| c.as_slice().to_vec()),
    })
}

/// Evaluates the bound between a pooled candidate set and the fitted summary.
pub fn compute_bound(plus_samples: &FeatureMatrix, summary: &IdSummary) -> Result<ScoreReport> {
    check_dim(summary.dim(), plus_samples.dim())?;
    if plus_samples.is_empty() {
        return Err(Error::EmptyInput("no candidate samples"));
    }
    let kind = summary.norm_kind;
    let centered;
    let plus = match &summary.center {
        Some(c) => {
            centered = plus_samples.centered(c)?;
            &centered
        }
        None => plus_samples,
    };
    let k = summary.k();
    let mut counts = vec![0usize; k];
    let mut plus_max = vec![0.0f64; k];
    let mut r_b = summary.r_b_id;
    for row in plus.iter_rows() {
        let r = norm_slice(row, kind);
        r_b = r_b.max(r);
        if let Some(j) = summary.partition.index_of_norm(r) {
            counts[j] += 1;
            plus_max[j] = plus_max[j].max(r);
        }
    }
    let d = plus.rows() as f64;
    let delta_mu = diff_norm(&plus.mean()?, &summary.mean, kind);

    let mut best = 0usize;
    let mut best_s = 0.0f64;
    for j in 0..k {
        let hit = counts[j] > 0;
        let f_plus = counts[j] as f64 / d;
        let r_a = if hit {
            summary.shell_max_norm[j].max(plus_max[j])
        } else {
            summary.shell_max_norm[j]
        };
        let s = (r_b - r_a) * (f_plus - summary.shell_freq[j]).abs();
        if s > best_s {
            best_s = s;
            best = j;
        }
    }
    Ok(assemble(delta_mu, best_s, best, r_b))
}

/// Scores a single candidate. Bit-identical to [`compute_bound`] with a
/// one-row candidate matrix.
pub fn score(x: &FeatureVector, summary: &IdSummary) -> Result<ScoreReport> {
    check_dim(summary.dim(), x.dim())?;
    Ok(score_slice(x.as_slice(), summary))
}

#[inline]
fn score_slice(x: &[f64], summary: &IdSummary) -> ScoreReport {
    let kind = summary.norm_kind;
    let (r_x, delta_mu) = norm_pair(x, summary.center.as_deref(), &summary.mean, kind);
    let r_b = summary.r_b_id.max(r_x);
    let p = &summary.partition;
    let freq = &summary.shell_freq;
    let max_norm = &summary.shell_max_norm;

    let mut best = 0usize;
    let mut best_s = 0.0f64;
    for j in 0..p.k() {
        let hit = p.contains(j, r_x);
        let f_plus = if hit { 1.0 } else { 0.0 };
        let r_a = if hit { max_norm[j].max(r_x) } else { max_norm[j] };
        let s = (r_b - r_a) * (f_plus - freq[j]).abs();
        if s > best_s {
            best_s = s;
            best = j;
        }
    }
    assemble(delta_mu, best_s, best, r_b)
}

/// Scores every row independently.
pub fn score_batch(xs: &FeatureMatrix, summary: &IdSummary) -> Result<Vec<ScoreReport>> {
    check_dim(summary.dim(), xs.dim())?;
    Ok(xs.iter_rows().map(|row| score_slice(row, summary)).collect())
}

/// `ID` iff the score reaches `threshold`.
pub fn classify(x: &FeatureVector, summary: &IdSummary, threshold: f64) -> Result<Label> {
    Ok(label_for(score(x, summary)?.score, threshold))
}

pub fn label_for(score: f64, threshold: f64) -> Label {
    if score >= threshold {
        Label::Id
    } else {
        Label::Ood
    }
}

pub fn score_eta1(x: &FeatureVector, summary: &IdSummary) -> Result<f64> {
    Ok(score(x, summary)?.eta1())
}

pub fn score_eta2(x: &FeatureVector, summary: &IdSummary) -> Result<f64> {
    Ok(score(x, summary)?.eta2())
}

/// Mean of `sample_count` rows drawn uniformly without replacement from
/// `pool`, seeded.
pub fn contaminated_center(
    pool: &FeatureMatrix,
    sample_count: usize,
    seed: u64,
) -> Result<FeatureVector> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if sample_count == 0 || sample_count > pool.rows() {
        return Err(Error::range(
            "sample_count",
            sample_count as f64,
            "[1, pool rows]",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, pool.rows(), sample_count).into_vec();
    picked.sort_unstable();
    FeatureVector::new(pool.select(&picked).mean()?)
}
