//! Per-checkpoint metric series, training-stage boundaries and teacher
//! checkpoint selection.

mod plot;
mod table;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::aligner::{train_aligner, AlignerConfig, AlignmentModel};
use crate::corpus::{read_sentences, CheckpointManifest, ManifestEntry, ParallelCorpus, Sentence, Vocabulary};
use crate::mt_metrics::{bleu, frequency_rank_profile, read_predictions, token_accuracy_by_frequency, FrequencyBuckets};
use crate::ngram_lm::NGramLM;
use crate::reordering::{corpus_reordering_scores, ReorderThresholds};

pub use plot::render_svg;
pub use table::{read_trajectory_csv, trajectory_to_csv};

pub const DEFAULT_DELTA_BLEU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory has no checkpoints")]
    Empty,
    #[error("steps must be strictly increasing: {step} follows {previous}")]
    NonIncreasingStep { step: u64, previous: u64 },
    #[error("series {series:?} has {found} points, need at least {needed}")]
    MissingSeries {
        series: String,
        found: usize,
        needed: usize,
    },
    #[error("delta must be finite and non-negative, got {0}")]
    BadDelta(f64),
    #[error("trajectory table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// How alignments for reordering scores are obtained.
#[derive(Debug, Clone, Copy)]
pub enum AlignerSource<'a> {
    /// Train a fresh aligner on each checkpoint's (source, translation) pairs.
    PerCheckpoint(AlignerConfig),
    /// Reuse one model for every checkpoint. Faster, but scores are no
    /// longer computed independently per checkpoint.
    Shared(&'a AlignmentModel),
}

impl AlignerSource<'_> {
    pub fn mode_name(&self) -> &'static str {
        match self {
            AlignerSource::PerCheckpoint(_) => "per-checkpoint",
            AlignerSource::Shared(_) => "shared",
        }
    }
}

pub struct TrajectoryInputs<'a> {
    /// References line-parallel with every checkpoint's translations.
    pub references: &'a [Sentence],
    /// Source side of the same lines, for alignment.
    pub heldout_source: &'a [Sentence],
    /// Target-side language models, one per order.
    pub lms: &'a [NGramLM],
    /// Training-target vocabulary used for frequency ranks.
    pub vocab: &'a Vocabulary,
    pub buckets: &'a FrequencyBuckets,
    pub aligner: AlignerSource<'a>,
    pub thresholds: ReorderThresholds,
    /// Sequential evaluation of checkpoints.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckpointMetrics {
    pub step: u64,
    pub bleu: Option<f64>,
    /// Per-token log10 probability keyed by LM order.
    pub lm: BTreeMap<usize, f64>,
    pub frs: Option<f64>,
    pub kendall: Option<f64>,
    pub freq_profile: Option<Vec<f64>>,
    pub accuracy: Option<Vec<Option<f64>>>,
    /// Notes such as out-of-range values.
    pub flags: Vec<String>,
    /// Set when the checkpoint could not be evaluated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTrajectory {
    pub rows: Vec<CheckpointMetrics>,
    pub lm_orders: Vec<usize>,
    pub bucket_labels: Vec<String>,
    pub alignment_mode: String,
}

impl MetricTrajectory {
    pub fn new(
        rows: Vec<CheckpointMetrics>,
        lm_orders: Vec<usize>,
        bucket_labels: Vec<String>,
        alignment_mode: impl Into<String>,
    ) -> Result<Self, TrajectoryError> {
        if rows.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for w in rows.windows(2) {
            if w[1].step <= w[0].step {
                return Err(TrajectoryError::NonIncreasingStep {
                    step: w[1].step,
                    previous: w[0].step,
                });
            }
        }
        Ok(Self {
            rows,
            lm_orders,
            bucket_labels,
            alignment_mode: alignment_mode.into(),
        })
    }

    pub fn steps(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.step).collect()
    }

    /// `(step, value)` pairs for a named series: `bleu`, `frs`, `kendall`
    /// or `lm<order>`.
    pub fn series(&self, name: &str) -> Vec<(u64, f64)> {
        let pick = |r: &CheckpointMetrics| -> Option<f64> {
            match name {
                "bleu" => r.bleu,
                "frs" => r.frs,
                "kendall" => r.kendall,
                other => other
                    .strip_prefix("lm")
                    .and_then(|o| o.parse().ok())
                    .and_then(|o: usize| r.lm.get(&o).copied()),
            }
        };
        self.rows.iter().filter_map(|r| pick(r).map(|v| (r.step, v))).collect()
    }

    pub fn series_names(&self) -> Vec<String> {
        let mut names = vec!["bleu".to_owned()];
        names.extend(self.lm_orders.iter().map(|o| format!("lm{o}")));
        names.push("frs".into());
        names.push("kendall".into());
        names
    }
}

fn range_flags(m: &mut CheckpointMetrics) {
    let mut check = |name: String, v: Option<f64>, lo: f64, hi: f64| {
        if let Some(v) = v {
            if !(lo..=hi).contains(&v) {
                m.flags.push(format!("{name}_out_of_range"));
            }
        }
    };
    check("bleu".into(), m.bleu, 0.0, 100.0);
    check("frs".into(), m.frs, 0.0, 1.0);
    check("kendall".into(), m.kendall, 0.0, 1.0);
    for (o, v) in &m.lm {
        check(format!("lm{o}"), Some(*v), f64::NEG_INFINITY, 0.0);
    }
}

fn evaluate(entry: &ManifestEntry, inputs: &TrajectoryInputs) -> Result<CheckpointMetrics, String> {
    let path = entry.translations_path.display();
    let translations = read_sentences(&entry.translations_path).map_err(|e| e.to_string())?;
    if translations.len() != inputs.references.len() {
        return Err(format!(
            "{path}: {} lines, references have {}",
            translations.len(),
            inputs.references.len()
        ));
    }
    let mut m = CheckpointMetrics {
        step: entry.step,
        ..Default::default()
    };
    m.bleu = Some(bleu(&translations, inputs.references, 4).map_err(|e| e.to_string())?.score);
    for lm in inputs.lms {
        let s = lm.score_corpus(&translations).map_err(|e| e.to_string())?;
        if s.token_count > 0 {
            m.lm.insert(lm.order(), s.per_token_log10());
        }
    }
    match frequency_rank_profile(&translations, inputs.vocab, inputs.buckets) {
        Ok(p) => m.freq_profile = Some(p.proportions),
        Err(_) => m.flags.push("no_tokens_for_profile".into()),
    }

    if inputs.heldout_source.len() != translations.len() {
        return Err(format!(
            "{path}: {} lines, held-out source has {}",
            translations.len(),
            inputs.heldout_source.len()
        ));
    }
    let corpus = ParallelCorpus::zip(inputs.heldout_source.to_vec(), translations).expect("lengths checked");
    let trained;
    let model = match inputs.aligner {
        AlignerSource::Shared(model) => model,
        AlignerSource::PerCheckpoint(cfg) => {
            trained = train_aligner(&corpus, &cfg).map_err(|e| format!("{path}: {e}"))?;
            &trained
        }
    };
    let reordering = corpus_reordering_scores(&model.align_corpus(&corpus), &inputs.thresholds)
        .map_err(|e| format!("{path}: {e}"))?;
    m.frs = reordering.mean_frs;
    m.kendall = reordering.mean_kendall;

    if let Some(pred) = &entry.predictions_path {
        let records = read_predictions(pred).map_err(|e| e.to_string())?;
        let acc = token_accuracy_by_frequency(&records, inputs.vocab, inputs.buckets)
            .map_err(|e| format!("{}: {e}", pred.display()))?;
        m.accuracy = Some(acc.accuracy);
    }
    range_flags(&mut m);
    Ok(m)
}

/// One row per manifest entry. A checkpoint whose files cannot be read or
/// scored gets a row carrying only the step and the error.
pub fn compute_trajectory(
    manifest: &CheckpointManifest,
    inputs: &TrajectoryInputs,
) -> Result<MetricTrajectory, TrajectoryError> {
    let run = |e: &ManifestEntry| {
        evaluate(e, inputs).unwrap_or_else(|error| {
            log::warn!("checkpoint step={} skipped: {error}", e.step);
            CheckpointMetrics {
                step: e.step,
                error: Some(error),
                ..Default::default()
            }
        })
    };
    let rows: Vec<CheckpointMetrics> = if inputs.deterministic {
        manifest.entries.iter().map(run).collect()
    } else {
        manifest.entries.par_iter().map(run).collect()
    };
    MetricTrajectory::new(
        rows,
        inputs.lms.iter().map(NGramLM::order).collect(),
        inputs.buckets.labels(),
        inputs.aligner.mode_name(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageBoundaries {
    pub stage1_end: u64,
    pub stage2_end: u64,
    pub stage1_rationale: String,
    pub stage2_rationale: String,
    /// Step of the peak per-token score for every LM order present.
    pub lm_peaks: BTreeMap<usize, u64>,
    pub warnings: Vec<String>,
}

/// Earliest step holding the maximum value.
fn argmax(series: &[(u64, f64)]) -> (u64, f64) {
    series
        .iter()
        .copied()
        .fold(None, |best: Option<(u64, f64)>, (s, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((s, v)),
        })
        .expect("non-empty series")
}

fn require(traj: &MetricTrajectory, name: &str, needed: usize) -> Result<Vec<(u64, f64)>, TrajectoryError> {
    let s = traj.series(name);
    if s.len() < needed {
        return Err(TrajectoryError::MissingSeries {
            series: name.into(),
            found: s.len(),
            needed,
        });
    }
    Ok(s)
}

fn check_delta(delta: f64) -> Result<(), TrajectoryError> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(TrajectoryError::BadDelta(delta))
    }
}

/// Stage 1 ends at the 2-gram LM peak; stage 2 ends at the first step
/// whose BLEU is within `delta` of the best.
pub fn detect_stages(traj: &MetricTrajectory, delta: f64) -> Result<StageBoundaries, TrajectoryError> {
    check_delta(delta)?;
    let lm2 = require(traj, "lm2", 3)?;
    let bleu = require(traj, "bleu", 3)?;
    let mut warnings = Vec::new();

    let (stage1_end, peak) = argmax(&lm2);
    let (_, best) = argmax(&bleu);
    let threshold = best - delta;
    let (mut stage2_end, first_bleu) = bleu.iter().copied().find(|&(_, b)| b >= threshold).expect("max qualifies");

    let last = *traj.steps().last().expect("non-empty");
    if stage1_end == last {
        warnings.push(format!("2-gram LM score still rising at the last step {last}"));
    }
    if stage2_end < stage1_end {
        warnings.push(format!(
            "BLEU band reached at step {stage2_end} before the LM peak; stage 2 end clamped to {stage1_end}"
        ));
        stage2_end = stage1_end;
    }
    if stage2_end == last {
        warnings.push(format!("BLEU band first reached at the last step {last}"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let lm_peaks = traj
        .lm_orders
        .iter()
        .filter_map(|&o| {
            let s = traj.series(&format!("lm{o}"));
            (!s.is_empty()).then(|| (o, argmax(&s).0))
        })
        .collect();
    Ok(StageBoundaries {
        stage1_end,
        stage2_end,
        stage1_rationale: format!("2-gram per-token log10 score peaks at {peak} (step {stage1_end})"),
        stage2_rationale: format!(
            "first BLEU >= {threshold} (max {best} - delta {delta}) is {first_bleu} at step {stage2_end}"
        ),
        lm_peaks,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeacherRecommendation {
    pub step: u64,
    pub bleu_at_step: f64,
    pub bleu_max: f64,
    pub frs_at_step: f64,
    pub delta: f64,
    /// Steps whose BLEU fell inside the band.
    pub candidates: Vec<u64>,
}

/// Among checkpoints within `delta` BLEU of the best, the one with the
/// highest FRS; ties go to the earliest step.
pub fn recommend_teacher(traj: &MetricTrajectory, delta: f64) -> Result<TeacherRecommendation, TrajectoryError> {
    check_delta(delta)?;
    let rows: Vec<(u64, f64, f64)> = traj
        .rows
        .iter()
        .filter_map(|r| Some((r.step, r.bleu?, r.frs?)))
        .collect();
    if rows.is_empty() {
        return Err(TrajectoryError::MissingSeries {
            series: "bleu+frs".into(),
            found: 0,
            needed: 1,
        });
    }
    let bleu_max = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let band: Vec<&(u64, f64, f64)> = rows.iter().filter(|r| r.1 >= bleu_max - delta).collect();
    let &&(step, bleu_at_step, frs_at_step) = band
        .iter()
        .fold(None, |best: Option<&&(u64, f64, f64)>, r| match best {
            Some(b) if b.2 >= r.2 => best,
            _ => Some(r),
        })
        .expect("argmax BLEU is always in the band");
    assert!(bleu_at_step >= bleu_max - delta);
    Ok(TeacherRecommendation {
        step,
        bleu_at_step,
        bleu_max,
        frs_at_step,
        delta,
        candidates: band.iter().map(|r| r.0).collect(),
    })
}
