use std::collections::HashMap;

use serde::Serialize;

use super::counts::{NGram, NGramCounts};
use super::vocab::{LmVocab, TokenId, BOS, EOS, UNK};
use super::LmError;
use crate::corpus::Sentence;

/// Log10 probability written for context-only entries (the begin marker).
pub const NO_PROB_LOG10: f64 = -99.0;
/// Log10 probability of an unknown token when a model has no `<unk>` entry.
pub const MISSING_UNK_LOG10: f64 = -100.0;

/// Discount used for an order whose count-of-counts cannot support the
/// closed-form estimate.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountMode {
    /// Count-of-counts estimate of D1, D2, D3+ per order.
    ModifiedKneserNey,
    /// One discount for every count and order; must lie in (0, 1].
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGramEntry {
    pub log10_prob: f64,
    pub log10_backoff: Option<f64>,
}

/// Back-off n-gram model. Stored probabilities are the interpolated
/// estimates; back-off weights are the interpolation masses of contexts.
#[derive(Debug, Clone)]
pub struct NGramLM {
    pub(crate) order: usize,
    pub(crate) vocab: LmVocab,
    pub(crate) tables: Vec<HashMap<NGram, NGramEntry>>,
    pub(crate) discounts: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LMScore {
    pub total_log10: f64,
    /// Tokens plus one end-of-sentence event per sentence.
    pub token_count: u64,
    pub oov_count: u64,
}

impl LMScore {
    pub fn per_token_log10(&self) -> f64 {
        self.total_log10 / self.token_count as f64
    }

    pub fn merge(self, other: LMScore) -> LMScore {
        LMScore {
            total_log10: self.total_log10 + other.total_log10,
            token_count: self.token_count + other.token_count,
            oov_count: self.oov_count + other.oov_count,
        }
    }
}

/// Modified Kneser-Ney discounts `[D1, D2, D3+]` from `[n1, n2, n3, n4]`.
///
/// Falls back to [`FALLBACK_DISCOUNT`] when n1 or n2 is zero or when any
/// estimate leaves `(0, k]`, which would make a probability negative or
/// zero out the back-off mass.
pub fn kn_discounts(n: [u64; 4]) -> [f64; 3] {
    let fallback = [FALLBACK_DISCOUNT; 3];
    if n[0] == 0 || n[1] == 0 {
        return fallback;
    }
    let [n1, n2, n3, n4] = n.map(|c| c as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let d1 = 1.0 - 2.0 * y * n2 / n1;
    let d2 = 2.0 - 3.0 * y * n3 / n2;
    let d3 = if n3 == 0.0 { 3.0 } else { 3.0 - 4.0 * y * n4 / n3 };
    let d = [d1, d2, d3];
    let valid = d
        .iter()
        .enumerate()
        .all(|(i, &dk)| dk > 0.0 && dk <= (i + 1) as f64);
    if valid {
        d
    } else {
        fallback
    }
}

fn discount_for(d: &[f64; 3], count: u64) -> f64 {
    match count {
        0 => 0.0,
        1 => d[0],
        2 => d[1],
        _ => d[2],
    }
}

#[derive(Default, Clone, Copy)]
struct ContextStats {
    total: u64,
    n: [u64; 3],
}

impl ContextStats {
    fn gamma(&self, d: &[f64; 3]) -> f64 {
        (d[0] * self.n[0] as f64 + d[1] * self.n[1] as f64 + d[2] * self.n[2] as f64)
            / self.total as f64
    }
}

fn context_stats(table: &HashMap<NGram, u64>) -> HashMap<NGram, ContextStats> {
    let mut stats: HashMap<NGram, ContextStats> = HashMap::new();
    for (gram, &c) in table {
        let s = stats.entry(gram[..gram.len() - 1].to_vec()).or_default();
        s.total += c;
        s.n[(c.min(3) - 1) as usize] += 1;
    }
    stats
}

/// Interpolated Kneser-Ney estimation down to a uniform distribution over
/// every predictable token (training words, `</s>` and `<unk>`).
pub fn train_lm(counts: &NGramCounts, mode: DiscountMode) -> Result<NGramLM, LmError> {
    let order = counts.order;
    let discounts: Vec<[f64; 3]> = match mode {
        DiscountMode::ModifiedKneserNey => counts.count_of_counts.iter().map(|&n| kn_discounts(n)).collect(),
        DiscountMode::Fixed(d) => {
            if !(d > 0.0 && d <= 1.0) {
                return Err(LmError::InvalidDiscount(d));
            }
            vec![[d; 3]; order]
        }
    };

    let predictable = counts.vocab.predictable().count() as f64;
    let mut lm = NGramLM {
        order,
        vocab: counts.vocab.clone(),
        tables: vec![HashMap::new(); order],
        discounts: Some(discounts.clone()),
    };

    for k in 1..=order {
        let table = &counts.tables[k - 1];
        let d = &discounts[k - 1];
        let stats = context_stats(table);
        let mut probs: HashMap<NGram, NGramEntry> = HashMap::with_capacity(table.len() + 1);
        for (gram, &c) in table {
            let ctx = &gram[..gram.len() - 1];
            let w = gram[gram.len() - 1];
            let s = &stats[ctx];
            let lower = if k == 1 {
                1.0 / predictable
            } else {
                10f64.powf(lm.log10_prob_ids(&ctx[1..], w))
            };
            let p = (c as f64 - discount_for(d, c)).max(0.0) / s.total as f64 + s.gamma(d) * lower;
            probs.insert(
                gram.clone(),
                NGramEntry {
                    log10_prob: p.log10(),
                    log10_backoff: None,
                },
            );
        }
        if k == 1 && !probs.contains_key(&vec![UNK]) {
            let s = &stats[&Vec::new()];
            probs.insert(
                vec![UNK],
                NGramEntry {
                    log10_prob: (s.gamma(d) / predictable).log10(),
                    log10_backoff: None,
                },
            );
        }
        lm.tables[k - 1] = probs;

        // Interpolation masses of this order's contexts become back-off
        // weights one order below.
        if k >= 2 {
            for (ctx, s) in &stats {
                let bow = s.gamma(d).log10();
                let entry = lm.tables[k - 2].entry(ctx.clone()).or_insert_with(|| {
                    debug_assert!(ctx.iter().all(|&t| t == BOS));
                    NGramEntry {
                        log10_prob: NO_PROB_LOG10,
                        log10_backoff: None,
                    }
                });
                entry.log10_backoff = Some(bow);
            }
        }
    }
    Ok(lm)
}

impl NGramLM {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &LmVocab {
        &self.vocab
    }

    /// Per-order discounts, when the model was trained rather than imported.
    pub fn discounts(&self) -> Option<&[[f64; 3]]> {
        self.discounts.as_deref()
    }

    /// Number of stored n-grams of order `k`.
    pub fn ngram_count(&self, k: usize) -> usize {
        self.tables.get(k - 1).map_or(0, HashMap::len)
    }

    pub fn entry(&self, ngram: &[&str]) -> Option<&NGramEntry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        let ids: NGram = ngram.iter().map(|t| self.vocab.lookup(t)).collect::<Option<_>>()?;
        self.tables[ngram.len() - 1].get(&ids)
    }

    /// Longest-match back-off lookup of `log10 p(w | history)`.
    pub fn log10_prob_ids(&self, history: &[TokenId], w: TokenId) -> f64 {
        let keep = history.len().min(self.order - 1);
        let hist = &history[history.len() - keep..];
        let mut key: Vec<TokenId> = Vec::with_capacity(keep + 1);
        let mut acc = 0.0;
        for start in 0..=hist.len() {
            let ctx = &hist[start..];
            key.clear();
            key.extend_from_slice(ctx);
            key.push(w);
            if let Some(e) = self.tables[key.len() - 1].get(&key) {
                return acc + e.log10_prob;
            }
            if !ctx.is_empty() {
                if let Some(bow) = self.tables[ctx.len() - 1].get(ctx).and_then(|e| e.log10_backoff) {
                    acc += bow;
                }
            }
        }
        if w == UNK {
            acc + MISSING_UNK_LOG10
        } else {
            self.log10_prob_ids(history, UNK)
        }
    }

    /// `p(w | context)` with tokens given as strings. Context tokens may
    /// include `<s>`; `w` must not be `<s>`.
    pub fn prob(&self, context: &[&str], w: &str) -> f64 {
        let ctx: Vec<TokenId> = context.iter().map(|t| self.vocab.id(t)).collect();
        10f64.powf(self.log10_prob_ids(&ctx, self.vocab.id(w)))
    }

    /// Sum of `p(w | context)` over every predictable token.
    pub fn total_mass(&self, context: &[TokenId]) -> f64 {
        self.vocab
            .predictable()
            .map(|w| 10f64.powf(self.log10_prob_ids(context, w)))
            .sum()
    }

    pub fn score_sentence(&self, sentence: &Sentence) -> LMScore {
        let mut history: Vec<TokenId> = vec![BOS; self.order - 1];
        let mut total = 0.0;
        let mut oov = 0;
        for token in sentence.iter() {
            let id = self.vocab.text_id(token);
            if id == UNK {
                oov += 1;
            }
            total += self.log10_prob_ids(&history, id);
            history.push(id);
        }
        total += self.log10_prob_ids(&history, EOS);
        LMScore {
            total_log10: total,
            token_count: sentence.len() as u64 + 1,
            oov_count: oov,
        }
    }

    /// Token-weighted aggregate over sentences.
    pub fn score_corpus(&self, sentences: &[Sentence]) -> Result<LMScore, LmError> {
        if sentences.is_empty() {
            return Err(LmError::EmptyInput);
        }
        Ok(sentences
            .iter()
            .map(|s| self.score_sentence(s))
            .fold(LMScore::default(), LMScore::merge))
    }

    /// Stored n-grams of order `k` sorted by id sequence.
    pub(crate) fn sorted_entries(&self, k: usize) -> Vec<(&NGram, &NGramEntry)> {
        let mut v: Vec<_> = self.tables[k - 1].iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }
}
