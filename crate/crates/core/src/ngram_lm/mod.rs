//! Interpolated modified Kneser-Ney n-gram language models over target-side
//! text, with ARPA import and export.

mod arpa;
mod counts;
mod model;
mod vocab;

use std::path::PathBuf;

use thiserror::Error;

pub use arpa::{export_arpa, import_arpa, parse_arpa, to_arpa_string};
pub use counts::{count_ngrams, NGram, NGramCounts};
pub use model::{
    kn_discounts, train_lm, DiscountMode, LMScore, NGramEntry, NGramLM, FALLBACK_DISCOUNT,
    MISSING_UNK_LOG10, NO_PROB_LOG10,
};
pub use vocab::{LmVocab, TokenId, BOS, BOS_TOKEN, EOS, EOS_TOKEN, UNK, UNK_TOKEN};

/// Highest supported n-gram order.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("n-gram order {0} is outside 1..={MAX_ORDER}")]
    UnsupportedOrder(usize),
    #[error("no sentences to count or score")]
    EmptyInput,
    #[error("fixed discount {0} must lie in (0, 1]")]
    InvalidDiscount(f64),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed ARPA (line {line}): {message}")]
    MalformedArpa { line: usize, message: String },
    #[error("ARPA section {section} declares {declared} entries but contains {found}")]
    SectionCountMismatch {
        section: String,
        declared: usize,
        found: usize,
    },
}
