//! Distances between feature vectors.
//!
//! [`distance`] is the reference, dense implementation. [`SparseRow`] and
//! [`sparse_distance`] compute the same values for vectors stored as
//! deviations from a shared background value (the representation of an
//! unheard gateway), touching only the handful of gateways that actually
//! received a message. The two agree bit for bit: every term skipped by the
//! sparse path is an exact zero in the dense sum, and Bray-Curtis uses
//! per-vector totals that both paths accumulate in index order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Manhattan,
    Chebyshev,
    Hamming,
    Canberra,
    Braycurtis,
    Jaccard,
    Matching,
    Dice,
    Kulsinski,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::Euclidean,
        MetricKind::Manhattan,
        MetricKind::Chebyshev,
        MetricKind::Hamming,
        MetricKind::Canberra,
        MetricKind::Braycurtis,
        MetricKind::Jaccard,
        MetricKind::Matching,
        MetricKind::Dice,
        MetricKind::Kulsinski,
    ];

    /// The real-valued metrics of the comparison table.
    pub const TABLE: [MetricKind; 6] = [
        MetricKind::Euclidean,
        MetricKind::Manhattan,
        MetricKind::Chebyshev,
        MetricKind::Hamming,
        MetricKind::Canberra,
        MetricKind::Braycurtis,
    ];

    /// Metrics defined on binarized vectors (non-zero is true).
    pub const BOOLEAN: [MetricKind; 4] = [
        MetricKind::Jaccard,
        MetricKind::Matching,
        MetricKind::Dice,
        MetricKind::Kulsinski,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Manhattan => "manhattan",
            MetricKind::Chebyshev => "chebyshev",
            MetricKind::Hamming => "hamming",
            MetricKind::Canberra => "canberra",
            MetricKind::Braycurtis => "braycurtis",
            MetricKind::Jaccard => "jaccard",
            MetricKind::Matching => "matching",
            MetricKind::Dice => "dice",
            MetricKind::Kulsinski => "kulsinski",
        }
    }

    pub fn is_boolean(self) -> bool {
        matches!(
            self,
            MetricKind::Jaccard | MetricKind::Matching | MetricKind::Dice | MetricKind::Kulsinski
        )
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown distance metric `{s}`")))
    }
}

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[inline]
fn canberra_term(a: f64, b: f64) -> f64 {
    ratio((a - b).abs(), a.abs() + b.abs())
}

/// Boolean distance from overlap counts over `n` positions.
#[inline]
fn boolean_distance(kind: MetricKind, both_true: usize, unequal: usize, n: usize) -> f64 {
    let (tt, ne, n) = (both_true as f64, unequal as f64, n as f64);
    match kind {
        MetricKind::Jaccard => ratio(ne, ne + tt),
        MetricKind::Matching => ne / n,
        MetricKind::Dice => ratio(ne, 2.0 * tt + ne),
        MetricKind::Kulsinski => (ne - tt + n) / (ne + n),
        _ => unreachable!("{kind} is not a boolean metric"),
    }
}

/// Distance between `x` and `y` under `kind`.
///
/// Panics if the lengths differ or are zero.
pub fn distance(kind: MetricKind, x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(
        x.len(),
        y.len(),
        "distance between vectors of different length"
    );
    assert!(!x.is_empty(), "distance between empty vectors");
    let pairs = x.iter().zip(y).map(|(&a, &b)| (a, b));
    match kind {
        MetricKind::Euclidean => pairs
            .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b))
            .sqrt(),
        MetricKind::Manhattan => pairs.fold(0.0, |acc, (a, b)| acc + (a - b).abs()),
        MetricKind::Chebyshev => pairs.fold(0.0, |acc, (a, b)| acc.max((a - b).abs())),
        MetricKind::Hamming => pairs.filter(|(a, b)| a != b).count() as f64 / x.len() as f64,
        MetricKind::Canberra => pairs.fold(0.0, |acc, (a, b)| acc + canberra_term(a, b)),
        MetricKind::Braycurtis => {
            let num = pairs.fold(0.0, |acc, (a, b)| acc + (a - b).abs());
            ratio(num, (total(x) + total(y)).abs())
        }
        _ => {
            let (mut tt, mut ne) = (0, 0);
            for (a, b) in pairs {
                let (a, b) = (a != 0.0, b != 0.0);
                tt += (a && b) as usize;
                ne += (a != b) as usize;
            }
            boolean_distance(kind, tt, ne, x.len())
        }
    }
}

/// Index-order sum, shared by the dense and sparse Bray-Curtis paths.
#[inline]
pub fn total(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, &v| acc + v)
}

/// Non-zero entries become 1.
pub fn binarize(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| if v != 0.0 { 1.0 } else { 0.0 })
        .collect()
}

/// A vector stored as its entries that differ from a background value.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    /// `(index, value)` in ascending index order, `value != background`.
    pub entries: Vec<(u32, f64)>,
    /// Dense index-order sum of all entries, background included.
    pub total: f64,
}

impl SparseRow {
    pub fn from_dense(x: &[f64], background: f64) -> Self {
        SparseRow {
            entries: x
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != background)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
            total: total(x),
        }
    }
}

/// Walks the union of two rows' explicit entries in ascending index order.
#[inline]
fn merge(
    a: &[(u32, f64)],
    b: &[(u32, f64)],
    background: f64,
    mut f: impl FnMut(f64, f64),
) -> usize {
    let (mut i, mut j, mut visited) = (0, 0, 0);
    while i < a.len() || j < b.len() {
        let ia = a.get(i).map_or(u32::MAX, |e| e.0);
        let ib = b.get(j).map_or(u32::MAX, |e| e.0);
        if ia == ib {
            f(a[i].1, b[j].1);
            i += 1;
            j += 1;
        } else if ia < ib {
            f(a[i].1, background);
            i += 1;
        } else {
            f(background, b[j].1);
            j += 1;
        }
        visited += 1;
    }
    visited
}

/// [`distance`] over two rows sparsified against the same `background`,
/// each of dense length `n`.
pub fn sparse_distance(
    kind: MetricKind,
    a: &SparseRow,
    b: &SparseRow,
    background: f64,
    n: usize,
) -> f64 {
    let (ea, eb) = (&a.entries[..], &b.entries[..]);
    match kind {
        MetricKind::Euclidean => {
            let mut acc = 0.0;
            merge(ea, eb, background, |x, y| acc += (x - y) * (x - y));
            acc.sqrt()
        }
        MetricKind::Manhattan => {
            let mut acc = 0.0;
            merge(ea, eb, background, |x, y| acc += (x - y).abs());
            acc
        }
        MetricKind::Chebyshev => {
            let mut acc: f64 = 0.0;
            merge(ea, eb, background, |x, y| acc = acc.max((x - y).abs()));
            acc
        }
        MetricKind::Hamming => {
            let mut ne = 0usize;
            merge(ea, eb, background, |x, y| ne += (x != y) as usize);
            ne as f64 / n as f64
        }
        MetricKind::Canberra => {
            let mut acc = 0.0;
            merge(ea, eb, background, |x, y| acc += canberra_term(x, y));
            acc
        }
        MetricKind::Braycurtis => {
            let mut num = 0.0;
            merge(ea, eb, background, |x, y| num += (x - y).abs());
            ratio(num, (a.total + b.total).abs())
        }
        _ => {
            let (mut tt, mut ne) = (0, 0);
            let visited = merge(ea, eb, background, |x, y| {
                let (x, y) = (x != 0.0, y != 0.0);
                tt += (x && y) as usize;
                ne += (x != y) as usize;
            });
            if background != 0.0 {
                tt += n - visited;
            }
            boolean_distance(kind, tt, ne, n)
        }
    }
}
