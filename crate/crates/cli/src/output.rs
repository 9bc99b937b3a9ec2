use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use pep_select::modelspace::fmt_f64;
use pep_select::EvidenceMethod;

use crate::args::RunConfig;

pub const SCHEMA: &str = "pep-select/1";

/// Output files of one run, held in memory until the run has succeeded.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    notices: Vec<String>,
    evidence_methods: BTreeMap<&'static str, usize>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// A CSV built from a header and rows of already formatted cells.
    pub fn add_csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        self.add(name, w.into_inner().map_err(|e| e.into_error())?);
        Ok(())
    }

    pub fn notice(&mut self, msg: impl Into<String>) {
        self.notices.push(msg.into());
    }

    pub fn count_methods(&mut self, counts: impl IntoIterator<Item = (EvidenceMethod, usize)>) {
        for (m, c) in counts {
            *self.evidence_methods.entry(m.name()).or_insert(0) += c;
        }
    }

    pub fn notices(&self) -> &[String] {
        &self.notices
    }

    fn manifest(&self, config: &RunConfig) -> Result<Vec<u8>> {
        let outputs: Vec<Value> = self
            .files
            .iter()
            .map(|(name, bytes)| json!({ "file": name, "bytes": bytes.len() }))
            .collect();
        let m = json!({
            "schema": SCHEMA,
            "version": env!("CARGO_PKG_VERSION"),
            "command": config.command.name(),
            "config": config,
            "outputs": outputs,
            "evidence_methods": self.evidence_methods,
            "notices": self.notices,
        });
        let mut bytes = serde_json::to_vec_pretty(&m)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// Write every file and then the manifest into `dir`. If any write fails
    /// the files written so far are removed, and the directory too when this
    /// call created it.
    pub fn commit(self, dir: &Path, config: &RunConfig) -> Result<()> {
        let manifest = self.manifest(config)?;
        let created = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut written: Vec<PathBuf> = Vec::new();
        let all = self
            .files
            .iter()
            .map(|(n, b)| (n.as_str(), b.as_slice()))
            .chain(std::iter::once(("manifest.json", manifest.as_slice())));
        for (name, bytes) in all {
            let path = dir.join(name);
            if let Err(e) = write_file(&path, bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_file(&path);
                if created {
                    let _ = fs::remove_dir(dir);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .with_context(|| format!("cannot write {}", path.display()))
}

/// JSON number, or null when not finite.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn cell(x: f64) -> String {
    fmt_f64(x)
}
