use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::output::sha256_file;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.toml";

/// Everything needed to reproduce a run: the full config, the inputs and
/// their digests, and the digests of what was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch when the run finished.
    pub created_unix: u64,
    pub mode: String,
    /// The resolved config with every value spelled out.
    pub config: String,
    pub inputs: Vec<InputSequence>,
    /// sha256 of each output file, keyed by path relative to the run directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSequence {
    pub sequence_id: String,
    pub path: PathBuf,
    /// sha256 of each input file present, keyed by file name.
    pub files: BTreeMap<String, String>,
}

impl InputSequence {
    pub fn record(sequence_id: &str, dir: &Path, names: &[&str]) -> Result<Self> {
        let path = dir
            .canonicalize()
            .with_context(|| format!("resolving {}", dir.display()))?;
        let mut files = BTreeMap::new();
        for name in names {
            let p = path.join(name);
            if p.exists() {
                files.insert(name.to_string(), sha256_file(&p)?);
            }
        }
        Ok(Self {
            sequence_id: sequence_id.to_string(),
            path,
            files,
        })
    }

    /// Fails if any recorded input changed since the manifest was written.
    pub fn verify(&self) -> Result<()> {
        for (name, digest) in &self.files {
            let p = self.path.join(name);
            let now = sha256_file(&p)?;
            if &now != digest {
                bail!(
                    "{} changed since the manifest was written (sha256 {now}, expected {digest})",
                    p.display()
                );
            }
        }
        Ok(())
    }
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }
}
