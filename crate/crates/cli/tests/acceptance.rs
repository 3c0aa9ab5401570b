//! Acceptance suite. Prints one PASS/FAIL line per criterion to stderr
//! (uncaptured) and fails if any criterion fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use mtss_core::aligner::{train_aligner, AlignerConfig};
use mtss_core::corpus::{ParallelCorpus, Sentence};
use mtss_core::mt_metrics::bleu;
use mtss_core::ngram_lm::{count_ngrams, parse_arpa, to_arpa_string, train_lm, DiscountMode, NGramLM};
use mtss_core::reordering::{
    corpus_reordering_scores, count_inversions, fuzzy_reordering_score, kendall_tau_distance, ReorderThresholds,
    SourcePermutation,
};
use mtss_core::trajectory::read_trajectory_csv;
use oracle::kn::KnOracle;
use oracle::synthetic::{planted_monotone, tiny_corpus, write_synthetic_run};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const MTSS: &str = env!("CARGO_BIN_EXE_mtss");

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("mtss-accept-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn mtss(dir: &Path, args: &[&str]) -> Output {
    Command::new(MTSS)
        .args(args)
        .current_dir(dir)
        .env_remove("MTSS_THREADS")
        .output()
        .expect("run mtss")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn sentences(c: &[Vec<String>]) -> Vec<Sentence> {
    c.iter().map(|s| Sentence::new(s.clone()).unwrap()).collect()
}

fn borrowed(c: &[Vec<String>]) -> Vec<Vec<&str>> {
    c.iter().map(|s| s.iter().map(String::as_str).collect()).collect()
}

fn mkn(c: &[Vec<String>], order: usize) -> NGramLM {
    train_lm(&count_ngrams(&sentences(c), order).unwrap(), DiscountMode::ModifiedKneserNey).unwrap()
}

fn within(budget: Duration, start: Instant) {
    let t = start.elapsed();
    assert!(t <= budget, "took {t:?}, budget {budget:?}");
}

fn c1_worked_examples() -> String {
    let start = Instant::now();
    let a = SourcePermutation::from_one_based(&[2, 1, 4, 3, 6, 5]).unwrap();
    let b = SourcePermutation::from_one_based(&[4, 5, 6, 1, 2, 3]).unwrap();
    let (fa, fb) = (fuzzy_reordering_score(&a).unwrap(), fuzzy_reordering_score(&b).unwrap());
    let (ka, kb) = (kendall_tau_distance(&a).unwrap(), kendall_tau_distance(&b).unwrap());
    assert_eq!((fa, fb), (0.0, 0.8));
    assert_eq!((ka, kb), (0.2, 0.6));
    // FRS calls the first least monotone, Kendall the second.
    assert!(fa < fb && ka < kb);
    within(Duration::from_millis(100), start);
    format!("FRS {fa}/{fb}, Kendall {ka}/{kb} (exact)")
}

fn c2_kendall_oracle() -> String {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=50);
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut rng);
        assert_eq!(count_inversions(&p), oracle::brute_force_inversions(&p), "{p:?}");
    }
    within(Duration::from_secs(5), start);
    "1000 permutations, n <= 50: merge-sort == brute force".into()
}

fn c3_language_model() -> String {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(3);
    let words: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
    let mut corpus = Vec::new();
    let mut tokens = 0;
    while tokens < 10_000 {
        let len = rng.gen_range(1..20);
        tokens += len;
        corpus.push((0..len).map(|_| words[rng.gen_range(0..words.len())].clone()).collect::<Vec<_>>());
    }
    let mut worst = 0.0f64;
    let mut sampled = 0;
    for order in [2, 3] {
        let lm = mkn(&corpus, order);
        let n = lm.vocab().len() as u32;
        for _ in 0..600 {
            let ctx: Vec<u32> = (0..order - 1).map(|_| rng.gen_range(0..n)).collect();
            worst = worst.max((lm.total_mass(&ctx) - 1.0).abs());
            sampled += 1;
        }
    }
    assert!(worst <= 1e-6, "normalization error {worst}");

    let mut max_diff = 0.0f64;
    for _ in 0..20 {
        let types = rng.gen_range(1..=6);
        let c = tiny_corpus(&mut rng, types, 30);
        for order in [2, 3] {
            let lm = mkn(&c, order);
            let kn = KnOracle::new(&borrowed(&c), order);
            let mut ctx_syms = kn.predictable();
            ctx_syms.retain(|s| s != "</s>");
            ctx_syms.push("<s>".into());
            for _ in 0..50 {
                let ctx: Vec<&str> = (0..order - 1).map(|_| ctx_syms.choose(&mut rng).unwrap().as_str()).collect();
                for w in kn.predictable() {
                    max_diff = max_diff.max((lm.prob(&ctx, &w) - kn.prob(&ctx, &w)).abs());
                }
            }
        }
    }
    assert!(max_diff <= 1e-9, "oracle diff {max_diff}");

    let lm = mkn(&corpus, 4);
    let back = parse_arpa(&to_arpa_string(&lm, &[])).unwrap();
    let mut rt = 0.0f64;
    for s in sentences(&corpus[..500]) {
        rt = rt.max((lm.score_sentence(&s).total_log10 - back.score_sentence(&s).total_log10).abs());
    }
    assert!(rt <= 1e-10, "round trip diff {rt}");
    within(Duration::from_secs(30), start);
    format!("mass error {worst:.1e} over {sampled} contexts; oracle diff {max_diff:.1e}; ARPA diff {rt:.1e}")
}

fn c4_aligner() -> String {
    let start = Instant::now();
    let (src, tgt) = planted_monotone(200, 20, 4, 12, 4);
    let corpus = ParallelCorpus::zip(
        src.iter().map(|l| Sentence::from_line(l)).collect(),
        tgt.iter().map(|l| Sentence::from_line(l)).collect(),
    )
    .unwrap();
    let cfg = AlignerConfig {
        iterations: 5,
        deterministic: true,
        ..AlignerConfig::default()
    };
    let model = train_aligner(&corpus, &cfg).unwrap();
    let alignments = model.align_corpus(&corpus);
    let (mut hit, mut total) = (0usize, 0usize);
    for a in &alignments {
        for j in 0..a.tgt_len() {
            total += 1;
            hit += usize::from(a.source_of(j) == Some(j));
        }
    }
    let share = hit as f64 / total as f64;
    assert!(share >= 0.99, "identity share {share}");
    let frs = corpus_reordering_scores(&alignments, &ReorderThresholds::default())
        .unwrap()
        .mean_frs
        .unwrap();
    assert_eq!(frs, 1.0);
    let ll = model.log_likelihoods();
    assert!(ll.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{ll:?}");
    within(Duration::from_secs(10), start);
    format!("identity {:.2}%, corpus FRS {frs}, log-likelihood non-decreasing over {} points", share * 100.0, ll.len())
}

fn c5_bleu() -> String {
    let start = Instant::now();
    let dir = scratch("bleu");
    fs::write(dir.join("a.txt"), "the cat sat on the mat\nhello world again today\n").unwrap();
    let printed = ok(&mtss(&dir, &["bleu", "--hyp", "a.txt", "--ref", "a.txt"]));
    assert_eq!(printed.trim(), "100.00");

    let hand = bleu(&[Sentence::from_line("a b c d")], &[Sentence::from_line("a b c d e")], 4)
        .unwrap()
        .score;
    assert!((hand - 77.88).abs() <= 0.01, "{hand}");

    let mut rng = StdRng::seed_from_u64(5);
    let mut max_diff = 0.0f64;
    for _ in 0..100 {
        let types = rng.gen_range(1..=5);
        let refs = tiny_corpus(&mut rng, types, 40);
        let hyps: Vec<Vec<String>> = refs
            .iter()
            .map(|r| {
                let mut h = r.clone();
                if h.len() > 1 && rng.gen_bool(0.5) {
                    let i = rng.gen_range(0..h.len() - 1);
                    h.swap(i, i + 1);
                }
                if rng.gen_bool(0.3) {
                    h.pop();
                }
                h
            })
            .collect();
        let got = bleu(&sentences(&hyps), &sentences(&refs), 4).unwrap().score;
        let want = oracle::bleu::bleu(&borrowed(&hyps), &borrowed(&refs), 4);
        max_diff = max_diff.max((got - want).abs());
    }
    assert!(max_diff <= 1e-6, "{max_diff}");
    let _ = fs::remove_dir_all(&dir);
    within(Duration::from_secs(10), start);
    format!("identity {printed_trim}, hand example {hand:.4}, oracle diff {max_diff:.1e}", printed_trim = printed.trim())
}

fn c6_synthetic_trajectory() -> String {
    let start = Instant::now();
    let dir = scratch("trajectory");
    let run = write_synthetic_run(&dir, 300, 6);
    let p = |x: &Path| x.file_name().unwrap().to_str().unwrap().to_owned();
    ok(&mtss(
        &dir,
        &[
            "--deterministic",
            "trajectory",
            "--manifest",
            &p(&run.manifest),
            "--refs",
            &p(&run.refs),
            "--train-tgt",
            &p(&run.train_tgt),
            "--heldout-src",
            &p(&run.heldout_src),
            "--out",
            "traj.csv",
            "--plot",
            "traj.svg",
        ],
    ));
    let traj = read_trajectory_csv(&fs::read_to_string(dir.join("traj.csv")).unwrap()).unwrap();
    assert_eq!(traj.steps(), run.steps);
    let vals = |name: &str| -> Vec<f64> { traj.series(name).into_iter().map(|p| p.1).collect() };
    let (frs, kendall, bleu_s) = (vals("frs"), vals("kendall"), vals("bleu"));
    assert_eq!(frs.len(), 5);
    assert!(frs.windows(2).all(|w| w[1] > w[0]), "FRS {frs:?}");
    assert!(kendall.windows(2).all(|w| w[1] < w[0]), "Kendall {kendall:?}");

    // Band covering exactly the two best-BLEU checkpoints.
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| bleu_s[b].total_cmp(&bleu_s[a]));
    let (top, second, third) = (order[0], order[1], order[2]);
    let delta = (bleu_s[top] - bleu_s[second]) + (bleu_s[second] - bleu_s[third]) / 2.0;
    let out = ok(&mtss(
        &dir,
        &["recommend-teacher", "--trajectory", "traj.csv", "--delta", &delta.to_string(), "--json"],
    ));
    let rec: serde_json::Value = serde_json::from_str(&out).unwrap();
    let planted = if frs[top] > frs[second] { top } else { second };
    assert_eq!(rec["result"]["step"].as_u64().unwrap(), run.steps[planted]);
    let mut band: Vec<u64> = vec![run.steps[top], run.steps[second]];
    band.sort_unstable();
    let cands: Vec<u64> = rec["result"]["candidates"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(cands, band);
    assert!(fs::read_to_string(dir.join("traj.svg")).unwrap().contains("<svg"));
    let _ = fs::remove_dir_all(&dir);
    within(Duration::from_secs(120), start);
    format!(
        "FRS {:?} increasing, Kendall {:?} decreasing, teacher = step {} (higher-FRS member of top-2 BLEU band)",
        frs.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        kendall.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        run.steps[planted]
    )
}

fn c7_scope_note() -> String {
    "documentation only: large-scale MT training figures are outside desk scale; no executable check".into()
}

/// Inputs for every subcommand, written into `dir`.
fn determinism_fixture(dir: &Path) {
    let run = write_synthetic_run(dir, 60, 8);
    fs::copy(&run.refs, dir.join("ref.txt")).unwrap();
    fs::copy(&run.heldout_src, dir.join("src.txt")).unwrap();
    fs::copy(dir.join("ckpt4000.txt"), dir.join("hyp.txt")).unwrap();
    let refs = fs::read_to_string(&run.refs).unwrap();
    let hyp = fs::read_to_string(dir.join("hyp.txt")).unwrap();
    let mut jsonl = String::new();
    for (r, h) in refs.lines().zip(hyp.lines()) {
        let r: Vec<&str> = r.split_whitespace().collect();
        let mut h: Vec<&str> = h.split_whitespace().collect();
        h.resize(r.len(), "<pad>");
        jsonl.push_str(&serde_json::json!({"ref": r, "top1": h}).to_string());
        jsonl.push('\n');
    }
    fs::write(dir.join("pred.jsonl"), jsonl).unwrap();
}

fn c8_determinism() -> String {
    let start = Instant::now();
    let dir = scratch("determinism");
    determinism_fixture(&dir);
    let runs: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["train-lm", "--in", "train.tgt", "--order", "4", "--out", "o/model.arpa"], vec!["o/model.arpa"]),
        (vec!["score-lm", "--model", "o/model.arpa", "--in", "hyp.txt", "--per-sentence"], vec![]),
        (
            vec!["align", "--src", "src.txt", "--tgt", "hyp.txt", "--out", "o/al.txt", "--dump-model", "o/t.tsv"],
            vec!["o/al.txt", "o/al.txt.meta.json", "o/t.tsv"],
        ),
        (
            vec!["reorder-score", "--alignments", "o/al.txt", "--src", "src.txt", "--tgt", "hyp.txt", "--out", "o/r.csv"],
            vec!["o/r.csv"],
        ),
        (vec!["bleu", "--hyp", "hyp.txt", "--ref", "ref.txt"], vec![]),
        (vec!["accuracy", "--pred", "pred.jsonl", "--vocab-from", "train.tgt"], vec![]),
        (vec!["freq-profile", "--in", "hyp.txt", "--vocab-from", "train.tgt", "--buckets", "5,20"], vec![]),
        (
            vec![
                "trajectory", "--manifest", "manifest.tsv", "--refs", "ref.txt", "--train-tgt", "train.tgt",
                "--heldout-src", "src.txt", "--out", "o/traj.csv", "--plot", "o/traj.svg",
            ],
            vec!["o/traj.csv", "o/traj.svg"],
        ),
        (vec!["detect-stages", "--trajectory", "o/traj.csv"], vec![]),
        (vec!["recommend-teacher", "--trajectory", "o/traj.csv", "--delta", "0.5"], vec![]),
    ];
    // (artifact, is_file, bytes)
    let once = || -> Vec<(String, bool, Vec<u8>)> {
        let _ = fs::remove_dir_all(dir.join("o"));
        let mut bytes = Vec::new();
        for (args, files) in &runs {
            for json in [false, true] {
                let mut full = vec!["--deterministic", "--seed", "7"];
                full.extend(args);
                if json {
                    full.push("--json");
                }
                bytes.push((format!("stdout of {}", full.join(" ")), false, ok(&mtss(&dir, &full)).into_bytes()));
                for f in files {
                    bytes.push((f.to_string(), true, fs::read(dir.join(f)).unwrap()));
                }
            }
        }
        bytes
    };
    let (a, b) = (once(), once());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!(x == y, "{} differs between runs", x.0);
        assert!(!x.1 || !x.2.is_empty(), "{} is empty", x.0);
    }
    let _ = fs::remove_dir_all(&dir);
    within(Duration::from_secs(300), start);
    format!("{} subcommands, {} artifacts bit-identical across two runs", runs.len(), a.len())
}

#[test]
fn acceptance_criteria() {
    let suite_start = Instant::now();
    type Criterion = (&'static str, fn() -> String);
    let criteria: Vec<Criterion> = vec![
        ("1 worked reordering examples", c1_worked_examples),
        ("2 Kendall inversion oracle", c2_kendall_oracle),
        ("3 language model correctness", c3_language_model),
        ("4 aligner correctness", c4_aligner),
        ("5 BLEU correctness", c5_bleu),
        ("6 synthetic trajectory end-to-end", c6_synthetic_trajectory),
        ("7 large-scale figures (documentation)", c7_scope_note),
        ("8 determinism", c8_determinism),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (name, f) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => {
                let _ = writeln!(err, "ACCEPTANCE PASS [{name}] ({secs:.2}s) {detail}");
            }
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                let _ = writeln!(err, "ACCEPTANCE FAIL [{name}] ({secs:.2}s) {msg}");
                failed.push(name);
            }
        }
    }
    let total = suite_start.elapsed();
    let _ = writeln!(err, "ACCEPTANCE total {:.1}s", total.as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(total <= Duration::from_secs(300));
}
