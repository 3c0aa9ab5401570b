//! Tokenized text ingestion, frequency-ranked vocabularies and checkpoint
//! manifests.
//!
//! Text is one sentence per line, UTF-8, with tokens separated by runs of
//! whitespace. Subword segmentation and casing happen upstream; tokens are
//! treated as opaque strings.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid UTF-8")]
    Undecodable { path: PathBuf, line: usize },
    #[error("line count mismatch: {source_path} has {source_lines} lines, {target_path} has {target_lines}")]
    LineCountMismatch {
        source_path: PathBuf,
        source_lines: usize,
        target_path: PathBuf,
        target_lines: usize,
    },
    #[error("invalid token {0:?}: tokens must be non-empty and whitespace-free")]
    InvalidToken(String),
    #[error("cannot build a vocabulary from input without tokens")]
    EmptyVocabulary,
    #[error("{path}:{line}: malformed manifest row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: step {step} does not increase over previous step {previous}")]
    NonIncreasingStep {
        path: PathBuf,
        line: usize,
        step: u64,
        previous: u64,
    },
    #[error("{manifest}:{line}: referenced file {missing} does not exist")]
    MissingFile {
        manifest: PathBuf,
        line: usize,
        missing: PathBuf,
    },
}

/// An ordered list of whitespace-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Result<Self, CorpusError> {
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(CorpusError::InvalidToken(bad.clone()));
        }
        Ok(Self { tokens })
    }

    /// Splits a line on runs of whitespace; leading and trailing whitespace
    /// is ignored.
    pub fn from_line(line: &str) -> Self {
        Self {
            tokens: line.split_whitespace().map(str::to_owned).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

impl TryFrom<Vec<String>> for Sentence {
    type Error = CorpusError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Sentence::new(tokens)
    }
}

impl From<Sentence> for Vec<String> {
    fn from(s: Sentence) -> Self {
        s.tokens
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// Splits `text` into lines (LF or CRLF) and tokenizes each one. A trailing
/// newline does not produce an extra empty sentence.
pub fn parse_sentences(text: &str) -> Vec<Sentence> {
    text.lines().map(Sentence::from_line).collect()
}

/// Reads a one-sentence-per-line file.
pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = decode_utf8(path, &bytes)?;
    Ok(parse_sentences(text))
}

fn decode_utf8<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str, CorpusError> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        CorpusError::Undecodable {
            path: path.to_path_buf(),
            line,
        }
    })
}

/// Line numbers (1-based) of empty sentences found during loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub empty_source_lines: Vec<usize>,
    pub empty_target_lines: Vec<usize>,
}

impl LoadReport {
    pub fn has_empty_lines(&self) -> bool {
        !self.empty_source_lines.is_empty() || !self.empty_target_lines.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pairs: Vec<(Sentence, Sentence)>,
    report: LoadReport,
}

impl ParallelCorpus {
    pub fn from_pairs(pairs: Vec<(Sentence, Sentence)>) -> Self {
        let mut report = LoadReport::default();
        for (i, (s, t)) in pairs.iter().enumerate() {
            if s.is_empty() {
                report.empty_source_lines.push(i + 1);
            }
            if t.is_empty() {
                report.empty_target_lines.push(i + 1);
            }
        }
        Self { pairs, report }
    }

    /// Zips two sentence lists; they must have the same length.
    pub fn zip(sources: Vec<Sentence>, targets: Vec<Sentence>) -> Option<Self> {
        (sources.len() == targets.len())
            .then(|| Self::from_pairs(sources.into_iter().zip(targets).collect()))
    }

    pub fn pairs(&self) -> &[(Sentence, Sentence)] {
        &self.pairs
    }

    pub fn line_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|(s, _)| s)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|(_, t)| t)
    }
}

pub fn load_parallel(source_path: &Path, target_path: &Path) -> Result<ParallelCorpus, CorpusError> {
    let sources = read_sentences(source_path)?;
    let targets = read_sentences(target_path)?;
    if sources.len() != targets.len() {
        return Err(CorpusError::LineCountMismatch {
            source_path: source_path.to_path_buf(),
            source_lines: sources.len(),
            target_path: target_path.to_path_buf(),
            target_lines: targets.len(),
        });
    }
    Ok(ParallelCorpus::from_pairs(sources.into_iter().zip(targets).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VocabEntry {
    pub id: usize,
    pub count: u64,
    pub rank: usize,
}

/// Token frequencies with dense ids and 1-based frequency ranks.
///
/// Rank 1 is the most frequent token; equal counts are ordered
/// lexicographically. Ids coincide with `rank - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: HashMap<String, VocabEntry>,
    by_rank: Vec<String>,
    total_tokens: u64,
}

impl Vocabulary {
    pub fn get(&self, token: &str) -> Option<&VocabEntry> {
        self.entries.get(token)
    }

    pub fn rank(&self, token: &str) -> Option<usize> {
        self.entries.get(token).map(|e| e.rank)
    }

    pub fn count(&self, token: &str) -> u64 {
        self.entries.get(token).map_or(0, |e| e.count)
    }

    /// Token at a 1-based rank.
    pub fn token_at_rank(&self, rank: usize) -> Option<&str> {
        rank.checked_sub(1)
            .and_then(|i| self.by_rank.get(i))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_rank.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Tokens in rank order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &VocabEntry)> {
        self.by_rank
            .iter()
            .map(move |t| (t.as_str(), &self.entries[t]))
    }
}

pub fn build_vocabulary<'a, I>(sentences: I) -> Result<Vocabulary, CorpusError>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for sentence in sentences {
        for token in sentence.iter() {
            *counts.entry(token.to_owned()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(CorpusError::EmptyVocabulary);
    }
    let mut ordered: Vec<(String, u64)> = counts.into_iter().collect();
    ordered.sort_unstable_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));

    let mut entries = HashMap::with_capacity(ordered.len());
    let mut by_rank = Vec::with_capacity(ordered.len());
    for (i, (token, count)) in ordered.into_iter().enumerate() {
        entries.insert(
            token.clone(),
            VocabEntry {
                id: i,
                count,
                rank: i + 1,
            },
        );
        by_rank.push(token);
    }
    Ok(Vocabulary {
        entries,
        by_rank,
        total_tokens: total,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub step: u64,
    pub translations_path: PathBuf,
    pub predictions_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckpointManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CheckpointManifest {
    pub fn steps(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.step).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses a manifest TSV: `step<TAB>translations[<TAB>predictions]`.
///
/// Blank lines and lines starting with `#` are skipped. Relative paths are
/// resolved against the manifest's directory and must exist.
pub fn load_manifest(path: &Path) -> Result<CheckpointManifest, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = decode_utf8(path, &bytes)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let malformed = |line: usize, reason: String| CorpusError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if !(2..=3).contains(&cols.len()) {
            return Err(malformed(
                line_no,
                format!("expected 2 or 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let step: u64 = cols[0]
            .parse()
            .ok()
            .filter(|&s| s > 0)
            .ok_or_else(|| malformed(line_no, format!("step {:?} is not a positive integer", cols[0])))?;
        if let Some(prev) = entries.last() {
            if step <= prev.step {
                return Err(CorpusError::NonIncreasingStep {
                    path: path.to_path_buf(),
                    line: line_no,
                    step,
                    previous: prev.step,
                });
            }
        }
        let resolve = |col: &str| -> Result<PathBuf, CorpusError> {
            if col.is_empty() {
                return Err(malformed(line_no, "empty path column".into()));
            }
            let p = base.join(col);
            if !p.is_file() {
                return Err(CorpusError::MissingFile {
                    manifest: path.to_path_buf(),
                    line: line_no,
                    missing: p,
                });
            }
            Ok(p)
        };
        let translations_path = resolve(cols[1])?;
        let predictions_path = cols.get(2).map(|c| resolve(c)).transpose()?;
        entries.push(ManifestEntry {
            step,
            translations_path,
            predictions_path,
        });
    }
    Ok(CheckpointManifest { entries })
}
