//! Result files: CSV tables, the JSON envelope and the artifact manifest.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// A file produced by a pipeline, kept in memory until the run finishes.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Builds a comma-separated table with LF line endings.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row(&mut self, fields: &[Field]) {
        let rec: Vec<String> = fields.iter().map(Field::render).collect();
        self.writer.write_record(&rec).expect("in-memory write");
    }

    pub fn finish(self, name: &str) -> Artifact {
        Artifact { name: name.to_string(), bytes: self.writer.into_inner().expect("in-memory flush") }
    }
}

pub enum Field {
    Int(u64),
    Num(f64),
    Text(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            // shortest round-trip form, so files are stable and lossless
            Field::Num(v) => format!("{v:?}"),
            Field::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}
impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}
impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

#[macro_export]
macro_rules! row {
    ($t:expr; $($v:expr),* $(,)?) => {
        $t.row(&[$($crate::output::Field::from($v)),*])
    };
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Git-style object hash: SHA-256 of `"blob <len>\0" + content`.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Assertion {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value <= threshold, value, threshold, detail: format!("{value:e} <= {threshold:e}") }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), pass: value >= threshold, value, threshold, detail: format!("{value:e} >= {threshold:e}") }
    }

    pub fn flag(name: &str, pass: bool, detail: &str) -> Self {
        Self { name: name.into(), pass, value: pass as u8 as f64, threshold: 1.0, detail: detail.into() }
    }
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    file: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    config: Value,
    config_hash: String,
    system: &'a str,
    pipeline: &'a str,
    results: &'a Value,
    assertions: &'a [Assertion],
    pass: bool,
    artifacts: Vec<ManifestEntry<'a>>,
}

/// Everything a finished pipeline hands back.
pub struct Outcome {
    pub results: Value,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

/// Writes the artifacts, `envelope.json` and `timings.json`.
pub fn write_run(
    dir: &Path,
    config: &crate::config::RunConfig,
    outcome: &Outcome,
    timings: &Value,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for a in &outcome.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let canonical = config.canonical();
    let envelope = Envelope {
        tool: "fiberlift",
        version: env!("CARGO_PKG_VERSION"),
        config: serde_json::to_value(config)?,
        config_hash: blob_hash(canonical.as_bytes()),
        system: &config.system.name,
        pipeline: config.pipeline.kind.name(),
        results: &outcome.results,
        assertions: &outcome.assertions,
        pass: outcome.pass(),
        artifacts: outcome
            .artifacts
            .iter()
            .map(|a| ManifestEntry { file: &a.name, bytes: a.bytes.len(), sha256: sha256_hex(&a.bytes) })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    fs::write(dir.join("envelope.json"), text)?;
    let mut t = serde_json::to_string_pretty(timings)?;
    t.push('\n');
    fs::write(dir.join("timings.json"), t)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_for_sha256_objects() {
        // `git hash-object --object-format=sha256` of an empty file
        assert_eq!(blob_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    }

    #[test]
    fn tables_use_lf_and_round_trip_floats() {
        let mut t = Table::new(&["n", "x"]);
        row!(t; 1usize, 0.1f64);
        row!(t; 2usize, 1e-300f64);
        let a = t.finish("t.csv");
        assert_eq!(String::from_utf8(a.bytes).unwrap(), "n,x\n1,0.1\n2,1e-300\n");
    }
}
