//! Corpus BLEU by explicit n-gram list scanning.

fn ngrams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].iter().map(|s| s.to_string()).collect())
        .collect()
}

/// Single-reference, unsmoothed corpus BLEU in [0, 100].
pub fn bleu(hyps: &[Vec<&str>], refs: &[Vec<&str>], max_n: usize) -> f64 {
    let mut matched = vec![0u64; max_n];
    let mut total = vec![0u64; max_n];
    let mut c = 0usize;
    let mut r = 0usize;
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len();
        r += rf.len();
        for n in 1..=max_n {
            let hg = ngrams(h, n);
            let mut pool = ngrams(rf, n);
            total[n - 1] += hg.len() as u64;
            for g in hg {
                if let Some(pos) = pool.iter().position(|x| *x == g) {
                    pool.remove(pos);
                    matched[n - 1] += 1;
                }
            }
        }
    }
    if c == 0 || (0..max_n).any(|i| matched[i] == 0) {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for i in 0..max_n {
        log_sum += (matched[i] as f64 / total[i] as f64).ln();
    }
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log_sum / max_n as f64).exp()
}
