use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Files to be written under an output directory, keyed by relative path.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn add(&mut self, rel: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.insert(rel.into(), contents.into());
    }

    pub fn digests(&self) -> BTreeMap<String, String> {
        self.files
            .iter()
            .map(|(k, v)| (k.clone(), sha256_hex(v)))
            .collect()
    }

    /// Writes everything into a scratch directory next to `out` and renames
    /// it into place, so a failure never leaves a partial `out` behind.
    pub fn commit(&self, out: &Path) -> Result<()> {
        if out.exists() {
            bail!("output directory {} already exists", out.display());
        }
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let scratch = tempfile::Builder::new()
            .prefix(".catdet-partial-")
            .tempdir_in(&parent)
            .with_context(|| format!("creating scratch directory in {}", parent.display()))?;
        for (rel, contents) in &self.files {
            let path = scratch.path().join(rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        let kept = scratch.keep();
        if let Err(e) = fs::rename(&kept, out) {
            let _ = fs::remove_dir_all(&kept);
            return Err(e).with_context(|| format!("moving output into {}", out.display()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_is_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested/out");
        let mut set = OutputSet::default();
        set.add("a.txt", "hello");
        set.add("sub/b.txt", "world");
        set.commit(&out).unwrap();
        assert_eq!(fs::read_to_string(out.join("sub/b.txt")).unwrap(), "world");
        assert!(set.commit(&out).is_err());
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("nested"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(leftovers, vec![std::ffi::OsString::from("out")]);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
