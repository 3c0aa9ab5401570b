//! Monotonicity of an alignment, measured on the permutation of source
//! positions it induces. Both scores compare against the identity order.

use serde::Serialize;
use thiserror::Error;

use crate::aligner::SentenceAlignment;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReorderError {
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("alignment has no links")]
    EmptyPermutation,
    #[error("permutation of length {len} is shorter than the required {min}")]
    BelowThreshold { len: usize, min: usize },
    #[error("no alignments to score")]
    NoAlignments,
}

/// Order in which source positions are read when following the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourcePermutation {
    order: Vec<usize>,
    retained: Vec<usize>,
}

impl SourcePermutation {
    /// `order` must be a permutation of `0..order.len()`.
    pub fn new(order: Vec<usize>) -> Result<Self, ReorderError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(ReorderError::NotAPermutation(n));
            }
        }
        Ok(Self {
            retained: (0..n).collect(),
            order,
        })
    }

    /// Builds from 1-based values, e.g. `(2, 1, 4, 3)`.
    pub fn from_one_based(values: &[usize]) -> Result<Self, ReorderError> {
        let n = values.len();
        let zero: Option<Vec<usize>> = values.iter().map(|v| v.checked_sub(1)).collect();
        Self::new(zero.ok_or(ReorderError::NotAPermutation(n))?)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Original source indices, in the same order as `order` labels them.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Reads source positions in target order.
///
/// An aligned source position is keyed by the smallest target index it
/// links to; an unaligned one inherits the key of the nearest aligned
/// position before it (or -1). Positions are stably sorted by
/// `(key, source index)`.
pub fn derive_permutation(alignment: &SentenceAlignment) -> Result<SourcePermutation, ReorderError> {
    if alignment.is_empty() {
        return Err(ReorderError::EmptyPermutation);
    }
    let n = alignment.src_len();
    let mut first_target: Vec<Option<usize>> = vec![None; n];
    for &(s, t) in alignment.links() {
        let k = &mut first_target[s];
        *k = Some(k.map_or(t, |old| old.min(t)));
    }
    let mut keys: Vec<(i64, usize)> = Vec::with_capacity(n);
    let mut inherited = -1i64;
    for (s, key) in first_target.iter().enumerate() {
        if let Some(t) = key {
            inherited = *t as i64;
        }
        keys.push((inherited, s));
    }
    keys.sort();
    let retained: Vec<usize> = (0..n).collect();
    let order = keys.into_iter().map(|(_, s)| s).collect();
    Ok(SourcePermutation { order, retained })
}

/// Number of maximal runs `σ[k], σ[k]+1, …` in the permutation.
pub fn chunk_count(sigma: &SourcePermutation) -> usize {
    1 + sigma
        .order
        .windows(2)
        .filter(|w| w[1] != w[0] + 1)
        .count()
}

/// `1 - (C - 1) / (M - 1)` with `C` chunks over `M` positions; 1 means
/// monotone.
pub fn fuzzy_reordering_score(sigma: &SourcePermutation) -> Result<f64, ReorderError> {
    let m = sigma.len();
    if m < 2 {
        return Err(ReorderError::BelowThreshold { len: m, min: 2 });
    }
    Ok(1.0 - (chunk_count(sigma) - 1) as f64 / (m - 1) as f64)
}

/// Pairs `i < j` with `values[i] > values[j]`, by merge sort.
pub fn count_inversions(values: &[usize]) -> u64 {
    fn sort(v: &mut [usize], buf: &mut [usize]) -> u64 {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut inv = sort(&mut v[..mid], &mut buf[..mid]) + sort(&mut v[mid..], &mut buf[mid..]);
        let (mut i, mut j, mut k) = (0, mid, 0);
        while i < mid && j < n {
            if v[i] <= v[j] {
                buf[k] = v[i];
                i += 1;
            } else {
                buf[k] = v[j];
                inv += (mid - i) as u64;
                j += 1;
            }
            k += 1;
        }
        buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
        k += mid - i;
        buf[k..].copy_from_slice(&v[j..]);
        v.copy_from_slice(buf);
        inv
    }
    let mut v = values.to_vec();
    let mut buf = vec![0; v.len()];
    sort(&mut v, &mut buf)
}

/// Inversions divided by `n(n-1)/2`; 0 means monotone.
pub fn kendall_tau_distance(sigma: &SourcePermutation) -> Result<f64, ReorderError> {
    let n = sigma.len();
    if n < 2 {
        return Err(ReorderError::BelowThreshold { len: n, min: 2 });
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(count_inversions(&sigma.order) as f64 / pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReorderThresholds {
    pub min_frs_len: usize,
    pub min_kendall_len: usize,
}

impl Default for ReorderThresholds {
    fn default() -> Self {
        Self {
            min_frs_len: 2,
            min_kendall_len: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NoLinks,
    BelowFrsThreshold,
    BelowKendallThreshold,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::NoLinks => "no_links",
            SkipReason::BelowFrsThreshold => "below_frs_threshold",
            SkipReason::BelowKendallThreshold => "below_kendall_threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceReordering {
    pub sentence_id: usize,
    pub src_len: usize,
    pub frs: Option<f64>,
    pub kendall: Option<f64>,
    /// Why at least one metric is missing.
    pub skipped: Vec<SkipReason>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SkipCounts {
    pub no_links: usize,
    pub below_threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReordering {
    /// Macro average over qualifying sentences; absent when none qualify.
    pub mean_frs: Option<f64>,
    pub mean_kendall: Option<f64>,
    pub frs_scored: usize,
    pub kendall_scored: usize,
    pub frs_skipped: SkipCounts,
    pub kendall_skipped: SkipCounts,
    pub sentences: Vec<SentenceReordering>,
}

pub fn score_sentence(id: usize, alignment: &SentenceAlignment, th: &ReorderThresholds) -> SentenceReordering {
    let mut out = SentenceReordering {
        sentence_id: id,
        src_len: alignment.src_len(),
        frs: None,
        kendall: None,
        skipped: Vec::new(),
    };
    let Ok(sigma) = derive_permutation(alignment) else {
        out.skipped.push(SkipReason::NoLinks);
        return out;
    };
    let m = sigma.len();
    if m >= th.min_frs_len.max(2) {
        out.frs = fuzzy_reordering_score(&sigma).ok();
    } else {
        out.skipped.push(SkipReason::BelowFrsThreshold);
    }
    if m >= th.min_kendall_len.max(2) {
        out.kendall = kendall_tau_distance(&sigma).ok();
    } else {
        out.skipped.push(SkipReason::BelowKendallThreshold);
    }
    out
}

pub fn corpus_reordering_scores(
    alignments: &[SentenceAlignment],
    th: &ReorderThresholds,
) -> Result<CorpusReordering, ReorderError> {
    if alignments.is_empty() {
        return Err(ReorderError::NoAlignments);
    }
    let sentences: Vec<SentenceReordering> = alignments
        .iter()
        .enumerate()
        .map(|(i, a)| score_sentence(i, a, th))
        .collect();

    let mut frs_skipped = SkipCounts::default();
    let mut kendall_skipped = SkipCounts::default();
    for s in &sentences {
        for r in &s.skipped {
            match r {
                SkipReason::NoLinks => {
                    frs_skipped.no_links += 1;
                    kendall_skipped.no_links += 1;
                }
                SkipReason::BelowFrsThreshold => frs_skipped.below_threshold += 1,
                SkipReason::BelowKendallThreshold => kendall_skipped.below_threshold += 1,
            }
        }
    }
    let mean = |vals: Vec<f64>| -> (Option<f64>, usize) {
        let n = vals.len();
        ((n > 0).then(|| vals.iter().sum::<f64>() / n as f64), n)
    };
    let (mean_frs, frs_scored) = mean(sentences.iter().filter_map(|s| s.frs).collect());
    let (mean_kendall, kendall_scored) = mean(sentences.iter().filter_map(|s| s.kendall).collect());
    Ok(CorpusReordering {
        mean_frs,
        mean_kendall,
        frs_scored,
        kendall_scored,
        frs_skipped,
        kendall_skipped,
        sentences,
    })
}
