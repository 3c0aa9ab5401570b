//! ARPA back-off model text format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::model::{NGramEntry, NGramLM};
use super::vocab::{LmVocab, TokenId};
use super::{LmError, MAX_ORDER};

/// Serializes a model. Lines in `header` are written before `\data\`, where
/// ARPA readers ignore them. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn to_arpa_string(lm: &NGramLM, header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "{line}");
    }
    if !header.is_empty() {
        out.push('\n');
    }
    out.push_str("\\data\\\n");
    for k in 1..=lm.order {
        let _ = writeln!(out, "ngram {k}={}", lm.tables[k - 1].len());
    }
    for k in 1..=lm.order {
        let _ = write!(out, "\n\\{k}-grams:\n");
        for (gram, e) in lm.sorted_entries(k) {
            let _ = write!(out, "{}\t", e.log10_prob);
            for (i, &id) in gram.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(lm.vocab.token(id));
            }
            if let Some(b) = e.log10_backoff {
                let _ = write!(out, "\t{b}");
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn export_arpa(lm: &NGramLM, path: &Path, header: &[String]) -> Result<(), LmError> {
    fs::write(path, to_arpa_string(lm, header)).map_err(|source| LmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn import_arpa(path: &Path) -> Result<NGramLM, LmError> {
    let text = fs::read_to_string(path).map_err(|source| LmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_arpa(&text)
}

fn malformed(line: usize, msg: impl Into<String>) -> LmError {
    LmError::MalformedArpa {
        line,
        message: msg.into(),
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64, LmError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(line, format!("invalid number {field:?}")))
}

pub fn parse_arpa(text: &str) -> Result<NGramLM, LmError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    // Anything before \data\ is free-form.
    let mut found_data = false;
    for (_, line) in lines.by_ref() {
        if line == "\\data\\" {
            found_data = true;
            break;
        }
    }
    if !found_data {
        return Err(malformed(0, "missing \\data\\ header"));
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut pending: Option<(usize, &str)> = None;
    for (no, line) in lines.by_ref() {
        if line.is_empty() {
            if declared.is_empty() {
                continue;
            }
            break;
        }
        let Some(rest) = line.strip_prefix("ngram ") else {
            pending = Some((no, line));
            break;
        };
        let (k, n) = rest
            .split_once('=')
            .ok_or_else(|| malformed(no, format!("bad count line {line:?}")))?;
        let k: usize = k.trim().parse().map_err(|_| malformed(no, format!("bad order in {line:?}")))?;
        let n: usize = n.trim().parse().map_err(|_| malformed(no, format!("bad count in {line:?}")))?;
        if k != declared.len() + 1 {
            return Err(malformed(no, format!("expected ngram {}=…, found {line:?}", declared.len() + 1)));
        }
        declared.push(n);
    }
    let order = declared.len();
    if order == 0 {
        return Err(malformed(0, "\\data\\ section declares no n-gram counts"));
    }
    if order > MAX_ORDER {
        return Err(LmError::UnsupportedOrder(order));
    }

    let mut vocab = LmVocab::default();
    let mut raw: Vec<Vec<(Vec<TokenId>, NGramEntry)>> = vec![Vec::new(); order];
    let mut current: Option<usize> = None;
    let mut ended = false;

    let rest = pending.into_iter().chain(lines);
    for (no, line) in rest {
        if line.is_empty() {
            continue;
        }
        if line == "\\end\\" {
            ended = true;
            break;
        }
        if let Some(k) = line
            .strip_prefix('\\')
            .and_then(|l| l.strip_suffix("-grams:"))
        {
            let k: usize = k.parse().map_err(|_| malformed(no, format!("bad section header {line:?}")))?;
            if k == 0 || k > order {
                return Err(malformed(no, format!("section {line} exceeds declared order {order}")));
            }
            if let Some(prev) = current {
                check_section(prev, declared[prev - 1], raw[prev - 1].len())?;
            }
            current = Some(k);
            continue;
        }
        let k = current.ok_or_else(|| malformed(no, "n-gram line outside a section"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let with_backoff = match fields.len() {
            n if n == k + 1 => false,
            n if n == k + 2 && k < order => true,
            n => {
                return Err(malformed(
                    no,
                    format!("expected {} or {} fields in \\{k}-grams:, found {n}", k + 1, k + 2),
                ))
            }
        };
        let log10_prob = parse_f64(fields[0], no)?;
        let gram: Vec<TokenId> = fields[1..=k].iter().map(|t| vocab.insert(t)).collect();
        let log10_backoff = if with_backoff {
            Some(parse_f64(fields[k + 1], no)?)
        } else {
            None
        };
        raw[k - 1].push((
            gram,
            NGramEntry {
                log10_prob,
                log10_backoff,
            },
        ));
    }
    if !ended {
        return Err(malformed(0, "missing \\end\\ marker"));
    }
    for k in 1..=order {
        check_section(k, declared[k - 1], raw[k - 1].len())?;
    }

    let tables = raw
        .into_iter()
        .map(|entries| entries.into_iter().collect::<HashMap<_, _>>())
        .collect();
    Ok(NGramLM {
        order,
        vocab,
        tables,
        discounts: None,
    })
}

fn check_section(k: usize, declared: usize, found: usize) -> Result<(), LmError> {
    if declared != found {
        return Err(LmError::SectionCountMismatch {
            section: format!("\\{k}-grams:"),
            declared,
            found,
        });
    }
    Ok(())
}
