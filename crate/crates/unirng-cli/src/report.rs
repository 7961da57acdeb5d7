//! Run metadata and CSV emission. Every artifact records the tool version,
//! model hash, seed, and command line, so a rerun with the same arguments is
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use unirng::model::PRNG_ALGORITHM;
use unirng::{MarkovParams, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_SCHEMA: &str = "unirng-csv-1";

/// SHA-256 of the model's canonical JSON form (field order and float
/// formatting are fixed by the canonicalization, so the hash identifies the
/// model, not the file it came from).
pub fn model_hash(params: &MarkovParams) -> String {
    let digest = Sha256::digest(params.to_canonical_json().as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("writing to a string cannot fail");
    }
    hex
}

/// Provenance block stamped on top of every report.
#[derive(Debug, Clone, Default)]
pub struct RunMetadata {
    pub model_hash: Option<String>,
    pub seed: Option<u64>,
    pub cmdline: String,
}

impl RunMetadata {
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# tool: unirng {TOOL_VERSION}"),
            format!("# schema: {CSV_SCHEMA}"),
            format!("# prng: {PRNG_ALGORITHM}"),
        ];
        if let Some(hash) = &self.model_hash {
            lines.push(format!("# model-sha256: {hash}"));
        }
        if let Some(seed) = self.seed {
            lines.push(format!("# seed: {seed}"));
        }
        lines.push(format!("# cmdline: {}", self.cmdline));
        lines
    }
}

/// Render a CSV: metadata comments, optional extra comment lines, a header,
/// then the rows.
pub fn render_csv(
    meta: &RunMetadata,
    extra_comments: &[String],
    columns: &[&str],
    rows: &[Vec<String>],
) -> String {
    let mut text = String::new();
    for line in meta.header_lines() {
        text.push_str(&line);
        text.push('\n');
    }
    for line in extra_comments {
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Write `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
