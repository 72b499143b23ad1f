//! Sample representation, norms, and the concentric shell partition that
//! provides the detector's condition functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense sample in ℝⁿ. Entries are finite and n ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("feature vector has no entries"));
        }
        if let Some((col, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col, value });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Row-major sample matrix. Every row has the same dimension `n ≥ 1`; the
/// row count may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyInput("matrix dimension is zero"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some((i, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dim,
                col: i % dim,
                value,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or(Error::EmptyInput("no rows to infer a dimension from"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    /// A matrix with no rows.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::from_flat(dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn row_vector(&self, i: usize) -> FeatureVector {
        FeatureVector(self.row(i).to_vec())
    }

    /// Stacks `other` under `self`.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    /// Returns a copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_flat(self.dim, self.data.iter().map(|v| v * c).collect())
    }

    /// Column means, summed sequentially in row order.
    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyInput("mean of an empty matrix"));
        }
        let mut acc = vec![0.0; self.dim];
        for row in self.iter_rows() {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        let m = self.rows() as f64;
        for a in &mut acc {
            *a /= m;
        }
        Ok(acc)
    }

    /// Returns a copy with `offset` subtracted from every row.
    pub fn centered(&self, offset: &[f64]) -> Result<Self> {
        check_dim(self.dim, offset.len())?;
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.iter_rows() {
            data.extend(row.iter().zip(offset).map(|(v, c)| v - c));
        }
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    /// Selects the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            data,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    #[default]
    L2,
    Linf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::Linf];

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" | "l_inf" | "inf" => Ok(NormKind::Linf),
            other => Err(format!("unknown norm `{other}` (expected l1, l2 or linf)")),
        }
    }
}

const LANES: usize = 8;

// Lane-split reductions: element i always lands in accumulator i % 8 and the
// lanes are combined in a fixed tree, so every entry path yields bit-identical
// norms for the same point while the compiler keeps the loops vectorized.
trait Lanes {
    fn step(acc: f64, e: f64) -> f64;
    fn finish(acc: &[f64; LANES]) -> f64;
}

struct SumSq;
struct SumAbs;
struct MaxAbs;

impl Lanes for SumSq {
    #[inline(always)]
    fn step(acc: f64, e: f64) -> f64 {
        acc + e * e
    }
    #[inline(always)]
    fn finish(acc: &[f64; LANES]) -> f64 {
        fold_sum(acc).sqrt()
    }
}

impl Lanes for SumAbs {
    #[inline(always)]
    fn step(acc: f64, e: f64) -> f64 {
        acc + e.abs()
    }
    #[inline(always)]
    fn finish(acc: &[f64; LANES]) -> f64 {
        fold_sum(acc)
    }
}

impl Lanes for MaxAbs {
    #[inline(always)]
    fn step(acc: f64, e: f64) -> f64 {
        acc.max(e.abs())
    }
    #[inline(always)]
    fn finish(acc: &[f64; LANES]) -> f64 {
        acc.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

#[inline(always)]
fn fold_sum(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

macro_rules! by_kind {
    ($kind:expr, $f:ident($($arg:expr),*)) => {
        match $kind {
            NormKind::L2 => $f::<SumSq>($($arg),*),
            NormKind::L1 => $f::<SumAbs>($($arg),*),
            NormKind::Linf => $f::<MaxAbs>($($arg),*),
        }
    };
}

#[inline(always)]
fn reduce1<R: Lanes>(x: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let xs = x.chunks_exact(LANES);
    let tail = xs.remainder();
    for cx in xs {
        for l in 0..LANES {
            acc[l] = R::step(acc[l], cx[l]);
        }
    }
    for (l, v) in tail.iter().enumerate() {
        acc[l] = R::step(acc[l], *v);
    }
    R::finish(&acc)
}

#[inline(always)]
fn reduce2<R: Lanes>(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let (ax, bx) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail = ax.remainder().iter().zip(bx.remainder());
    for (ca, cb) in ax.zip(bx) {
        for l in 0..LANES {
            acc[l] = R::step(acc[l], ca[l] - cb[l]);
        }
    }
    for (l, (u, v)) in tail.enumerate() {
        acc[l] = R::step(acc[l], u - v);
    }
    R::finish(&acc)
}

#[inline(always)]
fn pair2<R: Lanes>(x: &[f64], m: &[f64]) -> (f64, f64) {
    let mut a = [0.0f64; LANES];
    let mut b = [0.0f64; LANES];
    let (xs, ms) = (x.chunks_exact(LANES), m.chunks_exact(LANES));
    let tail = xs.remainder().iter().zip(ms.remainder());
    for (cx, cm) in xs.zip(ms) {
        for l in 0..LANES {
            a[l] = R::step(a[l], cx[l]);
            b[l] = R::step(b[l], cx[l] - cm[l]);
        }
    }
    for (l, (u, v)) in tail.enumerate() {
        a[l] = R::step(a[l], *u);
        b[l] = R::step(b[l], u - v);
    }
    (R::finish(&a), R::finish(&b))
}

#[inline(always)]
fn pair3<R: Lanes>(x: &[f64], c: &[f64], m: &[f64]) -> (f64, f64) {
    let mut a = [0.0f64; LANES];
    let mut b = [0.0f64; LANES];
    let (xs, cs, ms) = (x.chunks_exact(LANES), c.chunks_exact(LANES), m.chunks_exact(LANES));
    let tail = xs.remainder().iter().zip(cs.remainder()).zip(ms.remainder());
    for ((cx, cc), cm) in xs.zip(cs).zip(ms) {
        for l in 0..LANES {
            let u = cx[l] - cc[l];
            a[l] = R::step(a[l], u);
            b[l] = R::step(b[l], u - cm[l]);
        }
    }
    for (l, ((x, c), m)) in tail.enumerate() {
        let u = x - c;
        a[l] = R::step(a[l], u);
        b[l] = R::step(b[l], u - m);
    }
    (R::finish(&a), R::finish(&b))
}

/// ‖v‖ under `kind`.
#[inline]
pub fn norm_slice(v: &[f64], kind: NormKind) -> f64 {
    by_kind!(kind, reduce1(v))
}

/// ‖a − b‖ under `kind`. Slices must have equal length.
#[inline]
pub fn diff_norm(a: &[f64], b: &[f64], kind: NormKind) -> f64 {
    let b = &b[..a.len()];
    by_kind!(kind, reduce2(a, b))
}

/// `(‖x − c‖, ‖(x − c) − m‖)` in a single pass, with `c = 0` when absent.
/// Bit-identical to `norm_slice` and `diff_norm` on an explicitly centered
/// copy of `x`.
#[inline]
pub(crate) fn norm_pair(x: &[f64], c: Option<&[f64]>, m: &[f64], kind: NormKind) -> (f64, f64) {
    let m = &m[..x.len()];
    match c {
        Some(c) => {
            let c = &c[..x.len()];
            by_kind!(kind, pair3(x, c, m))
        }
        None => by_kind!(kind, pair2(x, m)),
    }
}

pub fn norm(v: &FeatureVector, kind: NormKind) -> f64 {
    norm_slice(v.as_slice(), kind)
}

/// Concentric norm shells `[r_{j−1}, r_j)` with `r_j = j·r_B/k`; the last
/// shell is closed so that every point of the `r_B` ball lands in exactly
/// one shell.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellPartition {
    radii: Vec<f64>,
}

impl ShellPartition {
    pub fn new(k: usize, r_b: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::range("k", 0.0, "[1, ∞)"));
        }
        if !(r_b.is_finite() && r_b > 0.0) {
            return Err(Error::range("r_B", r_b, "(0, ∞)"));
        }
        let kf = k as f64;
        let mut radii: Vec<f64> = (1..=k).map(|j| (j as f64 * r_b) / kf).collect();
        radii[k - 1] = r_b;
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::range("r_B", r_b, "a radius large enough to separate k shells"));
        }
        Ok(Self { radii })
    }

    pub fn k(&self) -> usize {
        self.radii.len()
    }

    pub fn r_b(&self) -> f64 {
        self.radii[self.radii.len() - 1]
    }

    /// Outer radii `r_1..r_k`.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Inner radius of the zero-based shell `j`.
    #[inline]
    pub fn inner(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.radii[j - 1]
        }
    }

    /// Indicator of the zero-based shell `j` evaluated at norm `r`.
    #[inline]
    pub fn contains(&self, j: usize, r: f64) -> bool {
        let hi = self.radii[j];
        r >= self.inner(j) && (r < hi || (j + 1 == self.radii.len() && r <= hi))
    }

    /// Zero-based shell index of a point with norm `r`, or `None` when
    /// `r > r_B`.
    #[inline]
    pub fn index_of_norm(&self, r: f64) -> Option<usize> {
        if r.is_nan() || r > self.r_b() || r < 0.0 {
            return None;
        }
        let k = self.radii.len();
        Some(self.radii[..k - 1].partition_point(|&hi| hi <= r))
    }
}

/// One-based shell index of `v`, absent when `‖v‖ > r_B`.
pub fn assign_shell(v: &FeatureVector, partition: &ShellPartition, kind: NormKind) -> Option<usize> {
    partition.index_of_norm(norm(v, kind)).map(|j| j + 1)
}
