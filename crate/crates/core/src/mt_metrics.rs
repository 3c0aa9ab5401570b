//! Corpus BLEU, token accuracy grouped by frequency rank, and rank profiles
//! of generated text.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Sentence, Vocabulary};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{hyps} hypotheses but {refs} references")]
    CountMismatch { hyps: usize, refs: usize },
    #[error("no sentences to evaluate")]
    Empty,
    #[error("max n-gram order must be at least 1")]
    BadOrder,
    #[error("bucket boundaries must be strictly increasing positive ranks: {0:?}")]
    BadBuckets(Vec<usize>),
    #[error("prediction record {index}: ref has {ref_len} tokens, top1 has {top1_len}")]
    RecordLength {
        index: usize,
        ref_len: usize,
        top1_len: usize,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    /// In [0, 100].
    pub score: f64,
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Set when some n-gram precision is zero, which forces the score to 0.
    pub zero_precision: bool,
}

impl BleuScore {
    pub fn precisions(&self) -> Vec<f64> {
        self.matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
            .collect()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_default() += 1;
        }
    }
    out
}

/// Single-reference corpus BLEU without smoothing.
pub fn bleu(hypotheses: &[Sentence], references: &[Sentence], max_order: usize) -> Result<BleuScore, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::CountMismatch {
            hyps: hypotheses.len(),
            refs: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::Empty);
    }
    if max_order == 0 {
        return Err(MetricsError::BadOrder);
    }
    let mut matches = vec![0u64; max_order];
    let mut totals = vec![0u64; max_order];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_order {
            let rc = ngram_counts(r.tokens(), n);
            for (g, c) in ngram_counts(h.tokens(), n) {
                matches[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    let zero_precision = matches.contains(&0);
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp()
    };
    let score = if zero_precision || hyp_len == 0 {
        0.0
    } else {
        let log_mean = matches
            .iter()
            .zip(&totals)
            .map(|(&m, &t)| (m as f64 / t as f64).ln())
            .sum::<f64>()
            / max_order as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuScore {
        score,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
        zero_precision,
    })
}

/// Contiguous rank intervals covering `1..` plus an out-of-vocabulary
/// bucket at index `len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyBuckets {
    /// Upper bounds (inclusive) of all but the last interval.
    bounds: Vec<usize>,
}

impl Default for FrequencyBuckets {
    fn default() -> Self {
        Self {
            bounds: vec![10, 50, 500, 5000],
        }
    }
}

impl FrequencyBuckets {
    /// `[10, 50]` gives `[1,10] [11,50] [51,∞) OOV`.
    pub fn from_bounds(bounds: Vec<usize>) -> Result<Self, MetricsError> {
        if bounds.first() == Some(&0) || bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MetricsError::BadBuckets(bounds));
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[usize] {
        &self.bounds
    }

    /// Number of buckets including OOV.
    pub fn len(&self) -> usize {
        self.bounds.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn oov_index(&self) -> usize {
        self.bounds.len() + 1
    }

    pub fn index_of(&self, rank: Option<usize>) -> usize {
        match rank {
            None => self.oov_index(),
            Some(r) => self.bounds.partition_point(|&b| b < r),
        }
    }

    /// Labels such as `1-10`, `5001+`, `oov`.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        let mut lo = 1;
        for &b in &self.bounds {
            out.push(format!("{lo}-{b}"));
            lo = b + 1;
        }
        out.push(format!("{lo}+"));
        out.push("oov".to_owned());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(rename = "ref")]
    pub ref_tokens: Sentence,
    #[serde(rename = "top1")]
    pub top1_tokens: Sentence,
}

/// Reads `{"ref": [...], "top1": [...]}` lines; blank lines are skipped.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, MetricsError> {
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(line).map_err(|e| MetricsError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.ref_tokens.len() != rec.top1_tokens.len() {
            return Err(MetricsError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!(
                    "ref has {} tokens, top1 has {}",
                    rec.ref_tokens.len(),
                    rec.top1_tokens.len()
                ),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub labels: Vec<String>,
    pub positions: Vec<u64>,
    pub matches: Vec<u64>,
    /// `None` for buckets without positions.
    pub accuracy: Vec<Option<f64>>,
    pub overall: f64,
}

pub fn token_accuracy_by_frequency(
    records: &[PredictionRecord],
    vocab: &Vocabulary,
    buckets: &FrequencyBuckets,
) -> Result<AccuracyReport, MetricsError> {
    let mut positions = vec![0u64; buckets.len()];
    let mut matches = vec![0u64; buckets.len()];
    for (index, rec) in records.iter().enumerate() {
        if rec.ref_tokens.len() != rec.top1_tokens.len() {
            return Err(MetricsError::RecordLength {
                index,
                ref_len: rec.ref_tokens.len(),
                top1_len: rec.top1_tokens.len(),
            });
        }
        for (r, p) in rec.ref_tokens.iter().zip(rec.top1_tokens.iter()) {
            let b = buckets.index_of(vocab.rank(r));
            positions[b] += 1;
            matches[b] += u64::from(r == p);
        }
    }
    let total: u64 = positions.iter().sum();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let accuracy = positions
        .iter()
        .zip(&matches)
        .map(|(&n, &m)| (n > 0).then(|| m as f64 / n as f64))
        .collect();
    Ok(AccuracyReport {
        labels: buckets.labels(),
        overall: matches.iter().sum::<u64>() as f64 / total as f64,
        positions,
        matches,
        accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    pub proportions: Vec<f64>,
}

/// Share of generated tokens per frequency bucket. Ranks come from
/// `vocab`, which should be built from training targets.
pub fn frequency_rank_profile(
    translations: &[Sentence],
    vocab: &Vocabulary,
    buckets: &FrequencyBuckets,
) -> Result<RankProfile, MetricsError> {
    let mut counts = vec![0u64; buckets.len()];
    for s in translations {
        for t in s.iter() {
            counts[buckets.index_of(vocab.rank(t))] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(RankProfile {
        labels: buckets.labels(),
        proportions: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        counts,
    })
}
