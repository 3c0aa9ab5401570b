use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use mtss_core::aligner::{emit_pharaoh, parse_pharaoh_file, train_aligner, AlignerConfig, SentenceAlignment};
use mtss_core::corpus::{
    build_vocabulary, load_manifest, load_parallel, read_sentences, ParallelCorpus, Sentence, Vocabulary,
};
use mtss_core::mt_metrics::{self, FrequencyBuckets};
use mtss_core::ngram_lm::{count_ngrams, export_arpa, import_arpa, train_lm, DiscountMode, NGramLM, MAX_ORDER};
use mtss_core::reordering::{corpus_reordering_scores, ReorderThresholds};
use mtss_core::trajectory::{
    compute_trajectory, detect_stages, read_trajectory_csv, recommend_teacher, render_svg, trajectory_to_csv,
    AlignerSource, MetricTrajectory, TrajectoryInputs,
};

use crate::args::{self, AlignerArgs, Buckets, Thresholds};
use crate::meta::{OutputDir, RunMeta};
use crate::UsageError;

pub struct Ctx {
    pub meta: RunMeta,
    pub json: bool,
    pub deterministic: bool,
    pub outputs: OutputDir,
}

impl Ctx {
    /// Writes `body` (with a metadata header using `comment`) to `out` when
    /// given. Stdout gets the JSON document under `--json`, otherwise `body`
    /// when there is no output file.
    fn finish<T: Serialize>(&self, out: Option<&Path>, comment: &str, body: &str, result: &T) -> Result<()> {
        if let Some(p) = out {
            self.outputs.write(p, &(self.meta.header(comment) + body))?;
        }
        if self.json {
            print!("{}", self.meta.json(result));
        } else if out.is_none() {
            print!("{body}");
        }
        Ok(())
    }
}

fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref()
        .ok_or_else(|| UsageError(format!("missing required option {flag}")).into())
}

fn usage(msg: String) -> anyhow::Error {
    UsageError(msg).into()
}

fn aligner_config(a: &AlignerArgs, deterministic: bool) -> Result<AlignerConfig> {
    let cfg = AlignerConfig {
        iterations: a.iters,
        lambda: a.lambda,
        p0: a.p0,
        deterministic,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn buckets(b: &Buckets) -> Result<FrequencyBuckets> {
    FrequencyBuckets::from_bounds(b.buckets.clone()).map_err(|e| usage(e.to_string()))
}

fn thresholds(t: &Thresholds) -> ReorderThresholds {
    ReorderThresholds {
        min_frs_len: t.min_frs_len,
        min_kendall_len: t.min_kendall_len,
    }
}

fn read(ctx: &mut Ctx, role: &str, path: &Path) -> Result<Vec<Sentence>> {
    ctx.meta.add_input(role, path)?;
    Ok(read_sentences(path)?)
}

fn vocab_from(ctx: &mut Ctx, path: &Path) -> Result<Vocabulary> {
    let sents = read(ctx, "vocab-from", path)?;
    build_vocabulary(&sents).with_context(|| format!("building vocabulary from {}", path.display()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct LmSummary {
    order: usize,
    ngrams: Vec<usize>,
    discounts: Option<Vec<[f64; 3]>>,
    out: PathBuf,
}

pub fn train_lm_cmd(ctx: &mut Ctx, a: &args::TrainLm) -> Result<()> {
    let input = need(&a.input, "--in")?;
    let out = need(&a.out, "--out")?;
    if !(1..=MAX_ORDER).contains(&a.order) {
        return Err(usage(format!("--order must be in 1..={MAX_ORDER}, got {}", a.order)));
    }
    let mode = match a.discount {
        None => DiscountMode::ModifiedKneserNey,
        Some(d) if d > 0.0 && d <= 1.0 => DiscountMode::Fixed(d),
        Some(d) => return Err(usage(format!("--discount must be in (0, 1], got {d}"))),
    };
    let sents = read(ctx, "in", input)?;
    let lm = train_lm(&count_ngrams(&sents, a.order)?, mode)?;
    let path = ctx.outputs.resolve(out)?;
    let header: Vec<String> = ctx.meta.lines().into_iter().map(|l| format!("# {l}")).collect();
    export_arpa(&lm, &path, &header)?;
    let summary = LmSummary {
        order: lm.order(),
        ngrams: (1..=lm.order()).map(|k| lm.ngram_count(k)).collect(),
        discounts: lm.discounts().map(<[_]>::to_vec),
        out: path,
    };
    if ctx.json {
        print!("{}", ctx.meta.json(&summary));
    }
    log::info!("trained order-{} model: {:?} n-grams", summary.order, summary.ngrams);
    Ok(())
}

#[derive(Serialize)]
struct SentenceScore {
    sentence_id: usize,
    log10_total: f64,
    tokens: u64,
    oov: u64,
    log10_per_token: f64,
}

#[derive(Serialize)]
struct CorpusScore {
    metric: &'static str,
    value: f64,
    log10_total: f64,
    tokens: u64,
    oov: u64,
    sentences: Option<Vec<SentenceScore>>,
}

pub fn score_lm_cmd(ctx: &mut Ctx, a: &args::ScoreLm) -> Result<()> {
    let model = need(&a.model, "--model")?;
    let input = need(&a.input, "--in")?;
    ctx.meta.add_input("model", model)?;
    let lm = import_arpa(model)?;
    let sents = read(ctx, "in", input)?;
    let corpus = lm.score_corpus(&sents)?;
    let (metric, value) = if a.total {
        ("log10_total", corpus.total_log10)
    } else {
        ("log10_per_token", corpus.per_token_log10())
    };
    let mut body = String::new();
    let sentences = a.per_sentence.then(|| {
        body.push_str("sentence_id\tlog10_total\ttokens\toov\tlog10_per_token\n");
        sents
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sc = lm.score_sentence(s);
                let row = SentenceScore {
                    sentence_id: i,
                    log10_total: sc.total_log10,
                    tokens: sc.token_count,
                    oov: sc.oov_count,
                    log10_per_token: sc.per_token_log10(),
                };
                let _ = writeln!(
                    body,
                    "{}\t{}\t{}\t{}\t{}",
                    row.sentence_id, row.log10_total, row.tokens, row.oov, row.log10_per_token
                );
                row
            })
            .collect()
    });
    if a.per_sentence {
        let _ = writeln!(body, "corpus\t{}\t{}\t{}\t{}", corpus.total_log10, corpus.token_count, corpus.oov_count, corpus.per_token_log10());
    } else {
        let _ = writeln!(body, "{value}");
    }
    let result = CorpusScore {
        metric,
        value,
        log10_total: corpus.total_log10,
        tokens: corpus.token_count,
        oov: corpus.oov_count,
        sentences,
    };
    ctx.finish(a.out.as_deref(), "# ", &body, &result)
}

#[derive(Serialize)]
struct AlignSummary {
    sentences: usize,
    links: usize,
    unaligned_targets: usize,
    log_likelihoods: Vec<f64>,
    table_entries: usize,
}

pub fn align_cmd(ctx: &mut Ctx, a: &args::Align) -> Result<()> {
    let src = need(&a.src, "--src")?;
    let tgt = need(&a.tgt, "--tgt")?;
    let cfg = aligner_config(&a.aligner, ctx.deterministic)?;
    ctx.meta.add_input("src", src)?;
    ctx.meta.add_input("tgt", tgt)?;
    let corpus = load_parallel(src, tgt)?;
    let model = train_aligner(&corpus, &cfg)?;
    let alignments = model.align_corpus(&corpus);
    let body: String = alignments.iter().map(|al| emit_pharaoh(al) + "\n").collect();
    if let Some(out) = &a.out {
        // Pharaoh has no comment syntax; provenance goes in a sidecar.
        let written = ctx.outputs.write(out, &body)?;
        let mut sidecar = written.into_os_string();
        sidecar.push(".meta.json");
        ctx.outputs.write(Path::new(&sidecar), &ctx.meta.json(&cfg))?;
    }
    if let Some(dump) = &a.dump_model {
        ctx.outputs.write(dump, &(ctx.meta.header("# ") + &model.dump_tsv()))?;
    }
    let links: usize = alignments.iter().map(|al| al.links().len()).sum();
    let targets: usize = alignments.iter().map(SentenceAlignment::tgt_len).sum();
    let summary = AlignSummary {
        sentences: alignments.len(),
        links,
        unaligned_targets: targets - links,
        log_likelihoods: model.log_likelihoods().to_vec(),
        table_entries: model.entry_count(),
    };
    if ctx.json {
        print!("{}", ctx.meta.json(&summary));
    } else if a.out.is_none() {
        print!("{body}");
    }
    Ok(())
}

pub fn reorder_score_cmd(ctx: &mut Ctx, a: &args::ReorderScore) -> Result<()> {
    let al_path = need(&a.alignments, "--alignments")?;
    let src = need(&a.src, "--src")?;
    let tgt = need(&a.tgt, "--tgt")?;
    ctx.meta.add_input("alignments", al_path)?;
    ctx.meta.add_input("src", src)?;
    ctx.meta.add_input("tgt", tgt)?;
    let corpus = load_parallel(src, tgt)?;
    let lengths: Vec<(usize, usize)> = corpus.pairs().iter().map(|(s, t)| (s.len(), t.len())).collect();
    let text = std::fs::read_to_string(al_path).with_context(|| format!("reading {}", al_path.display()))?;
    let parsed = parse_pharaoh_file(&text, Some(&lengths)).with_context(|| al_path.display().to_string())?;
    if parsed.len() != lengths.len() {
        anyhow::bail!(
            "{}: {} alignment lines, corpus has {} sentence pairs",
            al_path.display(),
            parsed.len(),
            lengths.len()
        );
    }
    let alignments = parsed
        .into_iter()
        .zip(&lengths)
        .enumerate()
        .map(|(i, (links, &(s, t)))| {
            SentenceAlignment::new(links, s, t).with_context(|| format!("{}: line {}", al_path.display(), i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = corpus_reordering_scores(&alignments, &thresholds(&a.thresholds))?;

    let mut body = String::from("sentence_id,src_len,frs,kendall,skipped_reason\n");
    for s in &scores.sentences {
        let reasons: Vec<&str> = s.skipped.iter().map(|r| r.as_str()).collect();
        let _ = writeln!(body, "{},{},{},{},{}", s.sentence_id, s.src_len, opt(s.frs), opt(s.kendall), reasons.join(";"));
    }
    let _ = writeln!(body, "mean,,{},{},", opt(scores.mean_frs), opt(scores.mean_kendall));
    let _ = writeln!(body, "scored,,{},{},", scores.frs_scored, scores.kendall_scored);
    ctx.finish(a.out.as_deref(), "# ", &body, &scores)
}

pub fn bleu_cmd(ctx: &mut Ctx, a: &args::Bleu) -> Result<()> {
    let hyp = need(&a.hyp, "--hyp")?;
    let reference = need(&a.reference, "--ref")?;
    if a.max_order == 0 {
        return Err(usage("--max-order must be at least 1".into()));
    }
    let h = read(ctx, "hyp", hyp)?;
    let r = read(ctx, "ref", reference)?;
    if h.len() != r.len() {
        anyhow::bail!(
            "{} has {} lines, {} has {}",
            hyp.display(),
            h.len(),
            reference.display(),
            r.len()
        );
    }
    let score = mt_metrics::bleu(&h, &r, a.max_order)?;
    if score.zero_precision {
        log::warn!("some n-gram precision is zero; BLEU is 0");
    }
    ctx.finish(None, "# ", &format!("{:.2}\n", score.score), &score)
}

pub fn accuracy_cmd(ctx: &mut Ctx, a: &args::Accuracy) -> Result<()> {
    let pred = need(&a.pred, "--pred")?;
    let vocab_path = need(&a.vocab_from, "--vocab-from")?;
    let b = buckets(&a.buckets)?;
    ctx.meta.add_input("pred", pred)?;
    let records = mt_metrics::read_predictions(pred)?;
    let vocab = vocab_from(ctx, vocab_path)?;
    let report = mt_metrics::token_accuracy_by_frequency(&records, &vocab, &b)?;
    let mut body = String::from("bucket\tpositions\tmatches\taccuracy\n");
    for i in 0..report.labels.len() {
        let _ = writeln!(
            body,
            "{}\t{}\t{}\t{}",
            report.labels[i],
            report.positions[i],
            report.matches[i],
            opt(report.accuracy[i])
        );
    }
    let _ = writeln!(
        body,
        "overall\t{}\t{}\t{}",
        report.positions.iter().sum::<u64>(),
        report.matches.iter().sum::<u64>(),
        report.overall
    );
    ctx.finish(a.out.as_deref(), "# ", &body, &report)
}

pub fn freq_profile_cmd(ctx: &mut Ctx, a: &args::FreqProfile) -> Result<()> {
    let input = need(&a.input, "--in")?;
    let vocab_path = need(&a.vocab_from, "--vocab-from")?;
    let b = buckets(&a.buckets)?;
    let sents = read(ctx, "in", input)?;
    let vocab = vocab_from(ctx, vocab_path)?;
    let profile = mt_metrics::frequency_rank_profile(&sents, &vocab, &b)?;
    let mut body = String::from("bucket\tcount\tproportion\n");
    for i in 0..profile.labels.len() {
        let _ = writeln!(body, "{}\t{}\t{}", profile.labels[i], profile.counts[i], profile.proportions[i]);
    }
    ctx.finish(a.out.as_deref(), "# ", &body, &profile)
}

fn shared_aligner(
    manifest: &mtss_core::corpus::CheckpointManifest,
    source: &[Sentence],
    cfg: &AlignerConfig,
) -> Result<mtss_core::aligner::AlignmentModel> {
    let mut pairs = Vec::new();
    for e in &manifest.entries {
        match read_sentences(&e.translations_path) {
            Ok(t) if t.len() == source.len() => pairs.extend(source.iter().cloned().zip(t)),
            Ok(_) | Err(_) => log::warn!("step {} left out of shared aligner training", e.step),
        }
    }
    Ok(train_aligner(&ParallelCorpus::from_pairs(pairs), cfg)?)
}

pub fn trajectory_cmd(ctx: &mut Ctx, a: &args::Trajectory) -> Result<()> {
    let manifest_path = need(&a.manifest, "--manifest")?;
    let refs_path = need(&a.refs, "--refs")?;
    let train_path = need(&a.train_tgt, "--train-tgt")?;
    let src_path = need(&a.heldout_src, "--heldout-src")?;
    let b = buckets(&a.buckets)?;
    let cfg = aligner_config(&a.aligner, ctx.deterministic)?;
    if a.lm_orders.is_empty() || a.lm_orders.iter().any(|&o| !(1..=MAX_ORDER).contains(&o)) {
        return Err(usage(format!("--lm-orders must list orders in 1..={MAX_ORDER}")));
    }

    ctx.meta.add_input("manifest", manifest_path)?;
    let manifest = load_manifest(manifest_path)?;
    for e in &manifest.entries {
        ctx.meta.add_input(&format!("step{}", e.step), &e.translations_path)?;
        if let Some(p) = &e.predictions_path {
            ctx.meta.add_input(&format!("step{}-pred", e.step), p)?;
        }
    }
    let refs = read(ctx, "refs", refs_path)?;
    let source = read(ctx, "heldout-src", src_path)?;
    if refs.len() != source.len() {
        anyhow::bail!(
            "{} has {} lines, {} has {}",
            refs_path.display(),
            refs.len(),
            src_path.display(),
            source.len()
        );
    }
    let train = read(ctx, "train-tgt", train_path)?;
    let vocab = build_vocabulary(&train).with_context(|| train_path.display().to_string())?;
    let mut orders = a.lm_orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let lms = orders
        .iter()
        .map(|&o| Ok(train_lm(&count_ngrams(&train, o)?, DiscountMode::ModifiedKneserNey)?))
        .collect::<Result<Vec<NGramLM>>>()?;

    let shared;
    let source_mode = if a.shared_aligner {
        shared = shared_aligner(&manifest, &source, &cfg)?;
        AlignerSource::Shared(&shared)
    } else {
        AlignerSource::PerCheckpoint(cfg)
    };
    let inputs = TrajectoryInputs {
        references: &refs,
        heldout_source: &source,
        lms: &lms,
        vocab: &vocab,
        buckets: &b,
        aligner: source_mode,
        thresholds: thresholds(&a.thresholds),
        deterministic: ctx.deterministic,
    };
    let traj = compute_trajectory(&manifest, &inputs)?;
    if traj.rows.iter().all(|r| r.error.is_some()) {
        let reasons: Vec<String> = traj.rows.iter().filter_map(|r| r.error.clone()).collect();
        anyhow::bail!("no checkpoint could be evaluated:\n  {}", reasons.join("\n  "));
    }
    if let Some(plot) = &a.plot {
        let svg = render_svg(&traj, "mtss trajectory");
        let comment: String = ctx.meta.lines().iter().map(|l| format!("<!-- {} -->\n", l.replace("--", "- -"))).collect();
        ctx.outputs.write(plot, &(comment + &svg))?;
    }
    let body = trajectory_to_csv(&traj, &[])?;
    ctx.finish(a.out.as_deref(), "# ", &body, &traj)
}

fn load_trajectory(ctx: &mut Ctx, a: &args::Stages) -> Result<MetricTrajectory> {
    let path = need(&a.trajectory, "--trajectory")?;
    ctx.meta.add_input("trajectory", path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_trajectory_csv(&text).with_context(|| path.display().to_string())
}

fn check_delta(d: f64) -> Result<()> {
    if d.is_finite() && d >= 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--delta must be a non-negative number, got {d}")))
    }
}

pub fn detect_stages_cmd(ctx: &mut Ctx, a: &args::Stages) -> Result<()> {
    check_delta(a.delta)?;
    let traj = load_trajectory(ctx, a)?;
    let s = detect_stages(&traj, a.delta)?;
    let mut body = format!(
        "stage1_end\t{}\t{}\nstage2_end\t{}\t{}\n",
        s.stage1_end, s.stage1_rationale, s.stage2_end, s.stage2_rationale
    );
    for (o, step) in &s.lm_peaks {
        let _ = writeln!(body, "lm{o}_peak\t{step}");
    }
    for w in &s.warnings {
        let _ = writeln!(body, "warning\t{w}");
    }
    ctx.finish(a.out.as_deref(), "# ", &body, &s)
}

pub fn recommend_teacher_cmd(ctx: &mut Ctx, a: &args::Stages) -> Result<()> {
    check_delta(a.delta)?;
    let traj = load_trajectory(ctx, a)?;
    let r = recommend_teacher(&traj, a.delta)?;
    let candidates: Vec<String> = r.candidates.iter().map(u64::to_string).collect();
    let body = format!(
        "step\t{}\nbleu\t{}\nbleu_max\t{}\nfrs\t{}\ndelta\t{}\ncandidates\t{}\n",
        r.step,
        r.bleu_at_step,
        r.bleu_max,
        r.frs_at_step,
        r.delta,
        candidates.join(",")
    );
    ctx.finish(a.out.as_deref(), "# ", &body, &r)
}
