//! Direct-formula interpolated modified Kneser-Ney, computed by re-scanning
//! the raw padded text for every quantity. Slow and table-free on purpose.

use std::collections::BTreeSet;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub struct KnOracle {
    order: usize,
    padded: Vec<Vec<String>>,
    words: BTreeSet<String>,
    discounts: Vec<[f64; 3]>,
}

impl KnOracle {
    pub fn new(corpus: &[Vec<&str>], order: usize) -> Self {
        let padded = corpus
            .iter()
            .map(|s| {
                let mut p: Vec<String> = vec![BOS.to_string(); order - 1];
                p.extend(s.iter().map(|t| t.to_string()));
                p.push(EOS.to_string());
                p
            })
            .collect();
        let words = corpus.iter().flatten().map(|t| t.to_string()).collect();
        let mut oracle = Self {
            order,
            padded,
            words,
            discounts: Vec::new(),
        };
        oracle.discounts = (1..=order).map(|k| oracle.estimate_discounts(k)).collect();
        oracle
    }

    pub fn with_fixed_discount(mut self, d: f64) -> Self {
        self.discounts = vec![[d; 3]; self.order];
        self
    }

    /// Everything that can be predicted: words, `</s>`, `<unk>`.
    pub fn predictable(&self) -> Vec<String> {
        let mut v: Vec<String> = self.words.iter().cloned().collect();
        v.push(EOS.into());
        v.push(UNK.into());
        v
    }

    /// Distinct k-grams in the padded text that end on a predicted token.
    fn distinct_grams(&self, k: usize) -> BTreeSet<Vec<String>> {
        let mut set = BTreeSet::new();
        for s in &self.padded {
            if s.len() < k {
                continue;
            }
            for w in s.windows(k) {
                if w[k - 1] != BOS {
                    set.insert(w.to_vec());
                }
            }
        }
        set
    }

    /// Raw occurrence count at the top order, number of distinct left
    /// neighbours below it.
    pub fn count(&self, gram: &[String]) -> u64 {
        let k = gram.len();
        if k == self.order {
            self.padded
                .iter()
                .map(|s| s.windows(k).filter(|w| *w == gram).count() as u64)
                .sum()
        } else {
            let mut left = BTreeSet::new();
            for s in &self.padded {
                for w in s.windows(k + 1) {
                    if w[1..] == *gram {
                        left.insert(w[0].clone());
                    }
                }
            }
            left.len() as u64
        }
    }

    pub fn discounts(&self, k: usize) -> [f64; 3] {
        self.discounts[k - 1]
    }

    fn estimate_discounts(&self, k: usize) -> [f64; 3] {
        let mut n = [0f64; 5];
        for g in self.distinct_grams(k) {
            let c = self.count(&g);
            if (1..=4).contains(&c) {
                n[c as usize] += 1.0;
            }
        }
        if n[1] == 0.0 || n[2] == 0.0 {
            return [0.75; 3];
        }
        let y = n[1] / (n[1] + 2.0 * n[2]);
        let d1 = 1.0 - 2.0 * y * n[2] / n[1];
        let d2 = 2.0 - 3.0 * y * n[3] / n[2];
        let d3 = if n[3] == 0.0 {
            3.0
        } else {
            3.0 - 4.0 * y * n[4] / n[3]
        };
        let ok = d1 > 0.0 && d1 <= 1.0 && d2 > 0.0 && d2 <= 2.0 && d3 > 0.0 && d3 <= 3.0;
        if ok {
            [d1, d2, d3]
        } else {
            [0.75; 3]
        }
    }

    fn normalize(&self, t: &str) -> String {
        if self.words.contains(t) || t == BOS || t == EOS {
            t.to_string()
        } else {
            UNK.to_string()
        }
    }

    /// `p(w | context)`; the context is truncated to `order - 1` tokens.
    pub fn prob(&self, context: &[&str], w: &str) -> f64 {
        let ctx: Vec<String> = context.iter().map(|t| self.normalize(t)).collect();
        let keep = ctx.len().min(self.order - 1);
        self.interp(&ctx[ctx.len() - keep..], &self.normalize(w))
    }

    fn interp(&self, ctx: &[String], w: &str) -> f64 {
        let k = ctx.len() + 1;
        let lower = if ctx.is_empty() {
            1.0 / self.predictable().len() as f64
        } else {
            self.interp(&ctx[1..], w)
        };
        let d = self.discounts(k);
        let mut denom = 0u64;
        let mut n = [0u64; 3];
        let mut own = 0u64;
        for v in self.predictable() {
            let mut g = ctx.to_vec();
            g.push(v.clone());
            let c = self.count(&g);
            if c == 0 {
                continue;
            }
            denom += c;
            n[(c.min(3) - 1) as usize] += 1;
            if v == w {
                own = c;
            }
        }
        if denom == 0 {
            return lower;
        }
        let dk = match own {
            0 => 0.0,
            1 => d[0],
            2 => d[1],
            _ => d[2],
        };
        let gamma = (d[0] * n[0] as f64 + d[1] * n[1] as f64 + d[2] * n[2] as f64) / denom as f64;
        (own as f64 - dk).max(0.0) / denom as f64 + gamma * lower
    }

    /// Sum of log10 probabilities of the tokens and the end marker.
    pub fn sentence_log10(&self, sentence: &[&str]) -> f64 {
        let mut hist: Vec<&str> = vec![BOS; self.order - 1];
        let mut total = 0.0;
        for &t in sentence.iter().chain(std::iter::once(&EOS)) {
            total += self.prob(&hist, t).log10();
            hist.push(t);
        }
        total
    }
}
