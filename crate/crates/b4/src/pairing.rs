//! Inertial pairing: positive/negative sample sets over momentum spans.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::ingest::TrendLabel;

/// Temporal window defining which neighbors count as momentum-consistent.
///
/// Plain integer spans are one-sided: positive k looks forward, negative k
/// looks backward. `Symmetric(k)` spans both directions. `None` (k = 0)
/// admits no positives at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MomentumSpan {
    Forward(usize),
    Backward(usize),
    Symmetric(usize),
    None,
}

impl MomentumSpan {
    /// Is `j` inside the span window of anchor `i`? The anchor itself is
    /// never in its own window.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        match *self {
            MomentumSpan::Forward(k) => j > i && j - i <= k,
            MomentumSpan::Backward(k) => j < i && i - j <= k,
            MomentumSpan::Symmetric(k) => i.abs_diff(j) <= k,
            MomentumSpan::None => false,
        }
    }

    /// The default grid: −2, −1, 0, 1, 2, ±1, ±2.
    pub fn default_grid() -> Vec<MomentumSpan> {
        vec![
            MomentumSpan::Backward(2),
            MomentumSpan::Backward(1),
            MomentumSpan::None,
            MomentumSpan::Forward(1),
            MomentumSpan::Forward(2),
            MomentumSpan::Symmetric(1),
            MomentumSpan::Symmetric(2),
        ]
    }
}

impl fmt::Display for MomentumSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentumSpan::Forward(k) => write!(f, "{k}"),
            MomentumSpan::Backward(k) => write!(f, "-{k}"),
            MomentumSpan::Symmetric(k) => write!(f, "+-{k}"),
            MomentumSpan::None => write!(f, "0"),
        }
    }
}

impl FromStr for MomentumSpan {
    type Err = DataError;

    /// Accepts "0", "1", "-2", "+-1", "±2".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse_k = |t: &str| -> Result<usize, DataError> {
            t.parse::<usize>()
                .map_err(|_| DataError::Config(format!("bad momentum span {s:?}")))
        };
        if let Some(rest) = s.strip_prefix("+-").or_else(|| s.strip_prefix("±")) {
            let k = parse_k(rest)?;
            if k == 0 {
                return Ok(MomentumSpan::None);
            }
            return Ok(MomentumSpan::Symmetric(k));
        }
        if let Some(rest) = s.strip_prefix('-') {
            let k = parse_k(rest)?;
            if k == 0 {
                return Ok(MomentumSpan::None);
            }
            return Ok(MomentumSpan::Backward(k));
        }
        let k = parse_k(s)?;
        if k == 0 {
            return Ok(MomentumSpan::None);
        }
        Ok(MomentumSpan::Forward(k))
    }
}

impl From<MomentumSpan> for String {
    fn from(span: MomentumSpan) -> String {
        span.to_string()
    }
}

impl TryFrom<String> for MomentumSpan {
    type Error = DataError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Per-anchor positive and negative index sets within a scope.
/// `P_i` and `N_i` are disjoint and never contain the anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSets {
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl PairSets {
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    /// Union A_i = P_i ∪ N_i, in index order.
    pub fn all(&self, i: usize) -> Vec<usize> {
        let mut out = self.positives[i].clone();
        out.extend_from_slice(&self.negatives[i]);
        out.sort_unstable();
        out
    }
}

/// P_i = same-label indices inside the span window; N_i = every other
/// index in scope (different label, or outside the window).
pub fn inertial_pairs(labels: &[TrendLabel], span: MomentumSpan) -> PairSets {
    let n = labels.len();
    let mut positives = Vec::with_capacity(n);
    let mut negatives = Vec::with_capacity(n);
    for i in 0..n {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for j in 0..n {
            if j == i {
                continue;
            }
            if span.contains(i, j) && labels[j] == labels[i] {
                pos.push(j);
            } else {
                neg.push(j);
            }
        }
        positives.push(pos);
        negatives.push(neg);
    }
    PairSets {
        positives,
        negatives,
    }
}
