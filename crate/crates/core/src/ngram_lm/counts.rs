use std::collections::HashMap;

use rayon::prelude::*;

use super::vocab::{LmVocab, TokenId, BOS, EOS};
use super::{LmError, MAX_ORDER};
use crate::corpus::Sentence;

pub type NGram = Vec<TokenId>;

/// Raw counts at the highest order, continuation counts (number of distinct
/// left extensions) below it.
#[derive(Debug, Clone)]
pub struct NGramCounts {
    pub(crate) order: usize,
    pub(crate) vocab: LmVocab,
    /// `tables[k - 1]` holds the k-grams.
    pub(crate) tables: Vec<HashMap<NGram, u64>>,
    pub(crate) count_of_counts: Vec<[u64; 4]>,
}

impl NGramCounts {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &LmVocab {
        &self.vocab
    }

    /// Count of an n-gram given as token strings; 0 when absent.
    pub fn get(&self, ngram: &[&str]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        let ids: NGram = ngram.iter().map(|t| self.vocab.id(t)).collect();
        self.tables[ngram.len() - 1].get(&ids).copied().unwrap_or(0)
    }

    /// Number of distinct n-grams stored at order `k`.
    pub fn distinct(&self, k: usize) -> usize {
        self.tables.get(k - 1).map_or(0, HashMap::len)
    }

    /// `[n1, n2, n3, n4]` for order `k`: how many n-grams have count exactly 1..4.
    pub fn count_of_counts(&self, k: usize) -> [u64; 4] {
        self.count_of_counts[k - 1]
    }

    /// All stored n-grams of order `k`, as token strings, sorted.
    pub fn entries(&self, k: usize) -> Vec<(Vec<String>, u64)> {
        let mut out: Vec<(Vec<String>, u64)> = self.tables[k - 1]
            .iter()
            .map(|(g, &c)| (g.iter().map(|&id| self.vocab.token(id).to_owned()).collect(), c))
            .collect();
        out.sort();
        out
    }
}

/// Pads each sentence with `order - 1` begin markers and one end marker and
/// counts n-grams. Sentences are sharded across the rayon pool; the merge is
/// an exact integer sum, so the result does not depend on scheduling.
pub fn count_ngrams(sentences: &[Sentence], order: usize) -> Result<NGramCounts, LmError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LmError::UnsupportedOrder(order));
    }
    if sentences.is_empty() {
        return Err(LmError::EmptyInput);
    }
    let vocab = LmVocab::from_sentences(sentences);

    let top: HashMap<NGram, u64> = sentences
        .par_chunks(1024)
        .map(|chunk| {
            let mut local: HashMap<NGram, u64> = HashMap::new();
            let mut padded: Vec<TokenId> = Vec::new();
            for s in chunk {
                padded.clear();
                padded.extend(std::iter::repeat_n(BOS, order - 1));
                padded.extend(s.iter().map(|t| vocab.text_id(t)));
                padded.push(EOS);
                for w in padded.windows(order) {
                    *local.entry(w.to_vec()).or_default() += 1;
                }
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge_into(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });

    let mut tables: Vec<HashMap<NGram, u64>> = vec![HashMap::new(); order];
    tables[order - 1] = top;
    for k in (1..order).rev() {
        let mut lower: HashMap<NGram, u64> = HashMap::new();
        for gram in tables[k].keys() {
            *lower.entry(gram[1..].to_vec()).or_default() += 1;
        }
        tables[k - 1] = lower;
    }

    let count_of_counts = tables
        .iter()
        .map(|t| {
            let mut n = [0u64; 4];
            for &c in t.values() {
                if (1..=4).contains(&c) {
                    n[c as usize - 1] += 1;
                }
            }
            n
        })
        .collect();

    Ok(NGramCounts {
        order,
        vocab,
        tables,
        count_of_counts,
    })
}

fn merge_into(mut into: HashMap<NGram, u64>, from: HashMap<NGram, u64>) -> HashMap<NGram, u64> {
    for (k, v) in from {
        *into.entry(k).or_default() += v;
    }
    into
}
