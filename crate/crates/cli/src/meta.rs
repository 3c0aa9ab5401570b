//! Provenance attached to every output: tool version, effective options and
//! SHA-256 digests of the inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hex = String::with_capacity(64);
    for b in Sha256::digest(&bytes) {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

impl RunMeta {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            tool: "mtss",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            config,
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(InputDigest {
            role: role.to_owned(),
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Header lines without a comment prefix.
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("{} {} {}", self.tool, self.version, self.command),
            format!("config {}", serde_json::to_string(&self.config).expect("string map serializes")),
        ];
        out.extend(
            self.inputs
                .iter()
                .map(|i| format!("input {} {} sha256:{}", i.role, i.path, i.sha256)),
        );
        out
    }

    /// Header lines each prefixed with `prefix`, newline-terminated.
    pub fn header(&self, prefix: &str) -> String {
        self.lines().iter().map(|l| format!("{prefix}{l}\n")).collect()
    }

    /// `{"meta": ..., "result": ...}` pretty-printed with a trailing newline.
    pub fn json<T: Serialize>(&self, result: &T) -> String {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            meta: &'a RunMeta,
            result: &'a T,
        }
        let mut s = serde_json::to_string_pretty(&Doc { meta: self, result }).expect("serializable result");
        s.push('\n');
        s
    }
}

/// Output paths resolved against an optional output directory.
#[derive(Debug, Clone, Default)]
pub struct OutputDir(pub Option<PathBuf>);

impl OutputDir {
    pub fn resolve(&self, p: &Path) -> anyhow::Result<PathBuf> {
        let full = match &self.0 {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        };
        if let Some(parent) = full.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(full)
    }

    pub fn write(&self, p: &Path, contents: &str) -> anyhow::Result<PathBuf> {
        let full = self.resolve(p)?;
        fs::write(&full, contents).with_context(|| format!("writing {}", full.display()))?;
        log::info!("wrote {}", full.display());
        Ok(full)
    }
}
