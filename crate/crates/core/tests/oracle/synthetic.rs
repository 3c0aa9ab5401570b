//! Planted synthetic corpora with known ground truth.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// Source word `i` translates to target word `i`.
pub fn dict_source(i: usize) -> String {
    format!("s{i}")
}

pub fn dict_target(i: usize) -> String {
    format!("T{i}")
}

/// `n` sentence pairs over a bijective `vocab`-word dictionary with
/// monotone word order; target j is the translation of source j.
pub fn planted_monotone(n: usize, vocab: usize, min_len: usize, max_len: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut src = Vec::with_capacity(n);
    let mut tgt = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.gen_range(min_len..=max_len);
        // Distinct words per sentence keep the planted alignment unambiguous.
        let mut ids: Vec<usize> = (0..vocab).collect();
        ids.shuffle(&mut rng);
        ids.truncate(len.min(vocab));
        src.push(ids.iter().map(|&i| dict_source(i)).collect::<Vec<_>>().join(" "));
        tgt.push(ids.iter().map(|&i| dict_target(i)).collect::<Vec<_>>().join(" "));
    }
    (src, tgt)
}

/// Local-window shuffle: one random window of `window + 1` consecutive
/// tokens is reversed, so disorder grows with `window`. `window = 0` is the
/// identity.
pub fn window_shuffle<T: Clone>(tokens: &[T], window: usize, rng: &mut StdRng) -> Vec<T> {
    let mut out = tokens.to_vec();
    let width = (window + 1).min(tokens.len());
    if width >= 2 {
        let start = rng.gen_range(0..=tokens.len() - width);
        out[start..start + width].reverse();
    }
    out
}

/// Drops each token independently with probability `rate`, never emptying
/// the sentence.
pub fn dropout<T: Clone>(tokens: &[T], rate: f64, rng: &mut StdRng) -> Vec<T> {
    let kept: Vec<T> = tokens.iter().filter(|_| rng.gen::<f64>() >= rate).cloned().collect();
    if kept.is_empty() {
        tokens[..1].to_vec()
    } else {
        kept
    }
}

/// Pseudo-checkpoint translations: each sentence of `translations` is
/// window-shuffled then subjected to dropout.
pub fn pseudo_checkpoint(translations: &[String], window: usize, drop_rate: f64, seed: u64) -> Vec<String> {
    let mut rng = StdRng::seed_from_u64(seed);
    translations
        .iter()
        .map(|line| {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let shuffled = window_shuffle(&toks, window, &mut rng);
            dropout(&shuffled, drop_rate, &mut rng).join(" ")
        })
        .collect()
}

/// Random tiny corpus: `sentences` lines over `types` symbols with at most
/// `max_tokens` tokens in total.
pub fn tiny_corpus(rng: &mut StdRng, types: usize, max_tokens: usize) -> Vec<Vec<String>> {
    let alphabet: Vec<String> = (0..types).map(|i| format!("{}", (b'a' + i as u8) as char)).collect();
    let mut budget = rng.gen_range(1..=max_tokens);
    let mut out = Vec::new();
    while budget > 0 {
        let len = rng.gen_range(0..=budget.min(8));
        budget -= len.min(budget);
        let s: Vec<String> = (0..len).map(|_| alphabet[rng.gen_range(0..types)].clone()).collect();
        out.push(s);
        if len == 0 && rng.gen_bool(0.5) {
            budget = budget.saturating_sub(1);
        }
    }
    out
}

/// Shuffle windows and dropout rates of the planted pseudo-checkpoints,
/// earliest first: both decrease towards the final, unperturbed one.
pub const TRAJECTORY_WINDOWS: [usize; 5] = [5, 4, 3, 2, 0];
pub const TRAJECTORY_DROPOUT: [f64; 5] = [0.2, 0.15, 0.1, 0.05, 0.0];

pub struct SyntheticRun {
    pub manifest: std::path::PathBuf,
    pub refs: std::path::PathBuf,
    pub heldout_src: std::path::PathBuf,
    pub train_tgt: std::path::PathBuf,
    pub steps: Vec<u64>,
}

/// Writes a held-out source/reference pair, a training target file and five
/// pseudo-checkpoint translation files plus their manifest into `dir`.
pub fn write_synthetic_run(dir: &std::path::Path, sentences: usize, seed: u64) -> SyntheticRun {
    use std::fs;
    fs::create_dir_all(dir).unwrap();
    let (src, tgt) = planted_monotone(sentences, 40, 10, 16, seed);
    let (_, train) = planted_monotone(sentences * 2, 40, 4, 16, seed + 1);
    let write = |name: &str, lines: &[String]| {
        let p = dir.join(name);
        fs::write(&p, lines.join("\n") + "\n").unwrap();
        p
    };
    let refs = write("heldout.tgt", &tgt);
    let heldout_src = write("heldout.src", &src);
    let train_tgt = write("train.tgt", &train);
    let mut manifest = String::from("# step\ttranslations\n");
    let mut steps = Vec::new();
    for (k, (&w, &d)) in TRAJECTORY_WINDOWS.iter().zip(&TRAJECTORY_DROPOUT).enumerate() {
        let step = 1000 * (k as u64 + 1);
        let name = format!("ckpt{step}.txt");
        write(&name, &pseudo_checkpoint(&tgt, w, d, seed + 100 + k as u64));
        manifest.push_str(&format!("{step}\t{name}\n"));
        steps.push(step);
    }
    let manifest_path = dir.join("manifest.tsv");
    fs::write(&manifest_path, manifest).unwrap();
    SyntheticRun {
        manifest: manifest_path,
        refs,
        heldout_src,
        train_tgt,
        steps,
    }
}
