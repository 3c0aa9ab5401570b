//! Pharaoh alignment lines: space-separated 0-based `src-tgt` pairs.

use std::fmt::Write as _;

use thiserror::Error;

use super::SentenceAlignment;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PharaohError {
    #[error("line {line}: malformed pair {text:?} at token {token}")]
    Malformed {
        line: usize,
        token: usize,
        text: String,
    },
    #[error("line {line}: pair {src}-{tgt} at token {token} outside {src_len}x{tgt_len}")]
    OutOfRange {
        line: usize,
        token: usize,
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },
}

fn parse_line(text: &str, line: usize) -> Result<Vec<(usize, usize)>, PharaohError> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            let parsed = tok
                .split_once('-')
                .and_then(|(s, t)| Some((s.parse().ok()?, t.parse().ok()?)));
            parsed.ok_or_else(|| PharaohError::Malformed {
                line,
                token: i + 1,
                text: tok.to_owned(),
            })
        })
        .collect()
}

/// Parses one line. Errors name the 1-based token position.
pub fn parse_pharaoh(text: &str) -> Result<Vec<(usize, usize)>, PharaohError> {
    parse_line(text, 1)
}

/// Parses a whole file, one alignment per line, checking indices against
/// the supplied `(src_len, tgt_len)` per line when given.
pub fn parse_pharaoh_file(
    text: &str,
    lengths: Option<&[(usize, usize)]>,
) -> Result<Vec<Vec<(usize, usize)>>, PharaohError> {
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            let links = parse_line(l, i + 1)?;
            if let Some(&(src_len, tgt_len)) = lengths.and_then(|ls| ls.get(i)) {
                if let Some((k, &(s, t))) = links
                    .iter()
                    .enumerate()
                    .find(|(_, &(s, t))| s >= src_len || t >= tgt_len)
                {
                    return Err(PharaohError::OutOfRange {
                        line: i + 1,
                        token: k + 1,
                        src: s,
                        tgt: t,
                        src_len,
                        tgt_len,
                    });
                }
            }
            Ok(links)
        })
        .collect()
}

/// Writes links sorted by `(tgt, src)`.
pub fn emit_pharaoh(alignment: &SentenceAlignment) -> String {
    let mut out = String::new();
    for (k, (s, t)) in alignment.links().iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{s}-{t}");
    }
    out
}
