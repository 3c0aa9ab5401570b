//! Word alignment with a diagonally-reparameterized IBM Model 2.
//!
//! Target positions choose a source parent (or null). The alignment prior
//! favours positions near the diagonal with a fixed tension `lambda`; only
//! the lexical translation table is re-estimated by EM.

mod pharaoh;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{ParallelCorpus, Sentence};

pub use pharaoh::{emit_pharaoh, parse_pharaoh, parse_pharaoh_file, PharaohError};

pub const NULL_TOKEN: &str = "<null>";
/// Translation probability used for unseen source/target combinations at
/// alignment time.
pub const UNSEEN_PROB: f64 = 1e-12;
/// Table entries below this are dropped after every M-step.
pub const PRUNE_BELOW: f64 = 1e-10;

const NULL_ID: u32 = 0;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("no sentence pair with both sides non-empty")]
    EmptyCorpus,
    #[error("invalid aligner parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),
    #[error(transparent)]
    Pharaoh(#[from] PharaohError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignerConfig {
    pub iterations: usize,
    /// Diagonal tension; larger values pull links toward the diagonal.
    pub lambda: f64,
    /// Prior probability of aligning a target token to null.
    pub p0: f64,
    /// Sequential E-step with a fixed reduction order.
    pub deterministic: bool,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            lambda: 4.0,
            p0: 0.08,
            deterministic: false,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if self.iterations == 0 {
            return Err(AlignError::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(AlignError::InvalidParameter(format!("lambda {} must be positive", self.lambda)));
        }
        // p0 = 0 is accepted: it disables null alignment entirely.
        if !(0.0..1.0).contains(&self.p0) {
            return Err(AlignError::InvalidParameter(format!("p0 {} must lie in [0, 1)", self.p0)));
        }
        Ok(())
    }
}

/// Source-to-target links of one sentence pair, 0-based, at most one source
/// per target position. Links are kept sorted by `(tgt, src)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SentenceAlignment {
    links: Vec<(usize, usize)>,
    src_len: usize,
    tgt_len: usize,
}

impl SentenceAlignment {
    pub fn new(mut links: Vec<(usize, usize)>, src_len: usize, tgt_len: usize) -> Result<Self, AlignError> {
        links.sort_unstable_by_key(|&(s, t)| (t, s));
        links.dedup();
        for &(s, t) in &links {
            if s >= src_len || t >= tgt_len {
                return Err(AlignError::InvalidAlignment(format!(
                    "link {s}-{t} outside {src_len}x{tgt_len}"
                )));
            }
        }
        if let Some(w) = links.windows(2).find(|w| w[0].1 == w[1].1) {
            return Err(AlignError::InvalidAlignment(format!(
                "target position {} has more than one link",
                w[0].1
            )));
        }
        Ok(Self {
            links,
            src_len,
            tgt_len,
        })
    }

    pub fn empty(src_len: usize, tgt_len: usize) -> Self {
        Self {
            links: Vec::new(),
            src_len,
            tgt_len,
        }
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn tgt_len(&self) -> usize {
        self.tgt_len
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Source position linked to target `j`, if any.
    pub fn source_of(&self, j: usize) -> Option<usize> {
        self.links
            .binary_search_by_key(&j, |&(_, t)| t)
            .ok()
            .map(|k| self.links[k].0)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn build<'a>(tokens: impl Iterator<Item = &'a str>, reserve_null: bool) -> Self {
        let sorted: BTreeSet<&str> = tokens.collect();
        let mut out = Self {
            tokens: Vec::with_capacity(sorted.len() + 1),
            ids: HashMap::with_capacity(sorted.len() + 1),
        };
        if reserve_null {
            out.tokens.push(NULL_TOKEN.to_owned());
        }
        for t in sorted {
            out.ids.insert(t.to_owned(), out.tokens.len() as u32);
            out.tokens.push(t.to_owned());
        }
        out
    }

    fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }
}

/// One conditional distribution t(· | f), sorted by target id.
#[derive(Debug, Clone, Default, PartialEq)]
struct Row {
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl Row {
    fn index(&self, e: u32) -> Option<usize> {
        self.targets.binary_search(&e).ok()
    }

    fn prob(&self, e: u32) -> Option<f64> {
        self.index(e).map(|k| self.probs[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentModel {
    lambda: f64,
    p0: f64,
    source: Vocab,
    target: Vocab,
    /// Indexed by source id; row 0 is the null word.
    rows: Vec<Row>,
    log_likelihoods: Vec<f64>,
}

/// Encoded pair: source ids (null excluded) and target ids.
type EncodedPair = (Vec<u32>, Vec<u32>);

fn diagonal(i: usize, j: usize, n: usize, m: usize) -> f64 {
    // i is 1-based, j is 0-based.
    -((i as f64 / n as f64) - ((j + 1) as f64 / m as f64)).abs()
}

/// Normalized diagonal weights for every source position of target `j`.
fn prior_weights(lambda: f64, j: usize, n: usize, m: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((1..=n).map(|i| (lambda * diagonal(i, j, n, m)).exp()));
    let z: f64 = out.iter().sum();
    for w in out.iter_mut() {
        *w /= z;
    }
}

impl AlignmentModel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// Corpus log-likelihood (natural log) before each EM iteration and
    /// after the last one.
    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    /// `t(e | f)`; `None` when either token is unknown or the entry was pruned.
    pub fn translation_prob(&self, source: &str, target: &str) -> Option<f64> {
        let f = if source == NULL_TOKEN {
            NULL_ID
        } else {
            self.source.get(source)?
        };
        let e = self.target.get(target)?;
        self.rows[f as usize].prob(e)
    }

    /// `(Σ_e t(e|f))` for every source token including null.
    pub fn row_sums(&self) -> Vec<(String, f64)> {
        self.rows
            .iter()
            .enumerate()
            .map(|(f, r)| (self.source.tokens[f].clone(), r.probs.iter().sum()))
            .collect()
    }

    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(|r| r.targets.len()).sum()
    }

    /// `f<TAB>e<TAB>prob` lines sorted by source then target token.
    pub fn dump_tsv(&self) -> String {
        let mut out = String::new();
        for (f, row) in self.rows.iter().enumerate() {
            for (&e, &p) in row.targets.iter().zip(&row.probs) {
                let _ = writeln!(out, "{}\t{}\t{}", self.source.tokens[f], self.target.tokens[e as usize], p);
            }
        }
        out
    }

    fn encode_training(&self, corpus: &ParallelCorpus) -> Vec<EncodedPair> {
        corpus
            .pairs()
            .iter()
            .filter(|(s, t)| !s.is_empty() && !t.is_empty())
            .map(|(s, t)| {
                (
                    s.iter().map(|w| self.source.ids[w]).collect(),
                    t.iter().map(|w| self.target.ids[w]).collect(),
                )
            })
            .collect()
    }

    /// Adds expected counts of one pair into `counts` and returns its
    /// log-likelihood.
    fn accumulate(&self, (src, tgt): &EncodedPair, counts: Option<&mut [Vec<f64>]>, scratch: &mut Vec<f64>) -> f64 {
        let n = src.len();
        let m = tgt.len();
        let mut ll = 0.0;
        let mut counts = counts;
        let mut post: Vec<f64> = Vec::with_capacity(n + 1);
        for (j, &e) in tgt.iter().enumerate() {
            prior_weights(self.lambda, j, n, m, scratch);
            post.clear();
            let null_row = &self.rows[NULL_ID as usize];
            post.push(self.p0 * null_row.prob(e).unwrap_or(0.0));
            for (i, &f) in src.iter().enumerate() {
                let t = self.rows[f as usize].prob(e).unwrap_or(0.0);
                post.push((1.0 - self.p0) * scratch[i] * t);
            }
            let total: f64 = post.iter().sum();
            if total <= 0.0 {
                continue;
            }
            ll += total.ln();
            if let Some(c) = counts.as_deref_mut() {
                if post[0] > 0.0 {
                    let k = null_row.index(e).expect("null row covers every target");
                    c[NULL_ID as usize][k] += post[0] / total;
                }
                for (i, &f) in src.iter().enumerate() {
                    let p = post[i + 1];
                    if p > 0.0 {
                        let k = self.rows[f as usize].index(e).expect("positive mass implies entry");
                        c[f as usize][k] += p / total;
                    }
                }
            }
        }
        ll
    }

    fn zero_counts(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| vec![0.0; r.targets.len()]).collect()
    }

    fn e_step(&self, pairs: &[EncodedPair], deterministic: bool) -> (Vec<Vec<f64>>, f64) {
        if deterministic {
            let mut counts = self.zero_counts();
            let mut scratch = Vec::new();
            let mut ll = 0.0;
            for p in pairs {
                ll += self.accumulate(p, Some(&mut counts), &mut scratch);
            }
            return (counts, ll);
        }
        pairs
            .par_chunks(256)
            .fold(
                || (self.zero_counts(), 0.0, Vec::new()),
                |(mut counts, mut ll, mut scratch), chunk| {
                    for p in chunk {
                        ll += self.accumulate(p, Some(&mut counts), &mut scratch);
                    }
                    (counts, ll, scratch)
                },
            )
            .map(|(c, ll, _)| (c, ll))
            .reduce(
                || (self.zero_counts(), 0.0),
                |(mut a, lla), (b, llb)| {
                    for (ra, rb) in a.iter_mut().zip(b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    (a, lla + llb)
                },
            )
    }

    fn log_likelihood(&self, pairs: &[EncodedPair], deterministic: bool) -> f64 {
        if deterministic {
            let mut scratch = Vec::new();
            return pairs.iter().map(|p| self.accumulate(p, None, &mut scratch)).sum();
        }
        pairs
            .par_iter()
            .map_init(Vec::new, |scratch, p| self.accumulate(p, None, scratch))
            .sum()
    }

    fn m_step(&mut self, counts: Vec<Vec<f64>>) {
        for (row, c) in self.rows.iter_mut().zip(counts) {
            let total: f64 = c.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let mut targets = Vec::with_capacity(row.targets.len());
            let mut probs = Vec::with_capacity(row.targets.len());
            for (&e, &x) in row.targets.iter().zip(&c) {
                let p = x / total;
                if p >= PRUNE_BELOW {
                    targets.push(e);
                    probs.push(p);
                }
            }
            let kept: f64 = probs.iter().sum();
            for p in probs.iter_mut() {
                *p /= kept;
            }
            row.targets = targets;
            row.probs = probs;
        }
    }

    /// Viterbi alignment of one pair. Unknown target tokens get
    /// [`UNSEEN_PROB`] from every source word while null keeps its prior,
    /// so they stay unlinked; unknown source words likewise contribute
    /// [`UNSEEN_PROB`].
    pub fn align(&self, source: &Sentence, target: &Sentence) -> SentenceAlignment {
        let n = source.len();
        let m = target.len();
        if n == 0 || m == 0 {
            return SentenceAlignment::empty(n, m);
        }
        let src: Vec<Option<u32>> = source.iter().map(|w| self.source.get(w)).collect();
        let mut prior = Vec::with_capacity(n);
        let mut links = Vec::new();
        for (j, word) in target.iter().enumerate() {
            prior_weights(self.lambda, j, n, m, &mut prior);
            let e = self.target.get(word);
            let null_t = match e {
                Some(e) => self.rows[NULL_ID as usize].prob(e).unwrap_or(UNSEEN_PROB),
                None => 1.0,
            };
            let mut best = self.p0 * null_t;
            let mut best_i: Option<usize> = None;
            for (i, f) in src.iter().enumerate() {
                let t = match (f, e) {
                    (Some(f), Some(e)) => self.rows[*f as usize].prob(e).unwrap_or(UNSEEN_PROB),
                    _ => UNSEEN_PROB,
                };
                let score = (1.0 - self.p0) * prior[i] * t;
                if score > best {
                    best = score;
                    best_i = Some(i);
                }
            }
            if let Some(i) = best_i {
                links.push((i, j));
            }
        }
        SentenceAlignment {
            links,
            src_len: n,
            tgt_len: m,
        }
    }

    /// Aligns every pair; output order matches the corpus.
    pub fn align_corpus(&self, corpus: &ParallelCorpus) -> Vec<SentenceAlignment> {
        corpus
            .pairs()
            .par_iter()
            .map(|(s, t)| self.align(s, t))
            .collect()
    }
}

/// Runs EM from a uniform table over co-occurring word pairs. Pairs with an
/// empty side are skipped.
pub fn train_aligner(corpus: &ParallelCorpus, config: &AlignerConfig) -> Result<AlignmentModel, AlignError> {
    config.validate()?;
    let usable: Vec<&(Sentence, Sentence)> = corpus
        .pairs()
        .iter()
        .filter(|(s, t)| !s.is_empty() && !t.is_empty())
        .collect();
    if usable.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    let source = Vocab::build(usable.iter().flat_map(|(s, _)| s.iter()), true);
    let target = Vocab::build(usable.iter().flat_map(|(_, t)| t.iter()), false);

    let mut cooc: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); source.tokens.len()];
    cooc[NULL_ID as usize] = (0..target.tokens.len() as u32).collect();
    for (s, t) in &usable {
        let tids: Vec<u32> = t.iter().map(|w| target.ids[w]).collect();
        for w in s.iter() {
            cooc[source.ids[w] as usize].extend(tids.iter().copied());
        }
    }
    let rows = cooc
        .into_iter()
        .map(|set| {
            let targets: Vec<u32> = set.into_iter().collect();
            let p = 1.0 / targets.len() as f64;
            Row {
                probs: vec![p; targets.len()],
                targets,
            }
        })
        .collect();

    let mut model = AlignmentModel {
        lambda: config.lambda,
        p0: config.p0,
        source,
        target,
        rows,
        log_likelihoods: Vec::with_capacity(config.iterations + 1),
    };
    let pairs = model.encode_training(corpus);
    for it in 0..config.iterations {
        let (counts, ll) = model.e_step(&pairs, config.deterministic);
        log::debug!("aligner iteration={} log_likelihood={ll}", it + 1);
        model.log_likelihoods.push(ll);
        model.m_step(counts);
    }
    let ll = model.log_likelihood(&pairs, config.deterministic);
    model.log_likelihoods.push(ll);
    Ok(model)
}
