//! Corpus-scale analytics for machine translation output across training
//! checkpoints: target-side n-gram LM scores, alignment monotonicity,
//! BLEU and token-frequency profiles, plus training-stage detection and
//! distillation-teacher selection over the resulting trajectories.

pub mod corpus;
pub mod ngram_lm;
pub mod aligner;
pub mod reordering;
pub mod mt_metrics;
pub mod trajectory;
