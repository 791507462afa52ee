//! Run manifests: a flat, diff-able record of what a command ran with.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub const RUN_MANIFEST_FILE: &str = "run-manifest.txt";

/// Accumulates resolved settings and input digests for one subcommand run.
#[derive(Debug, Default, Clone)]
pub struct RunManifest {
    entries: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        let mut m = RunManifest::default();
        m.set("subcommand", subcommand);
        m.set("tool_version", env!("CARGO_PKG_VERSION"));
        m.set("started_unix", &unix_now());
        m
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn set_display(&mut self, key: &str, value: impl std::fmt::Display) {
        self.set(key, &value.to_string());
    }

    /// Record the digest of an input file or directory tree.
    pub fn digest_input(&mut self, key: &str, path: &Path) -> std::io::Result<()> {
        let digest = digest_path(path)?;
        self.set(
            &format!("input.{key}"),
            &format!("{} sha256:{digest}", path.display()),
        );
        Ok(())
    }

    pub fn finish(mut self, out_dir: &Path) -> std::io::Result<()> {
        self.set("finished_unix", &unix_now());
        fs::create_dir_all(out_dir)?;
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k}={v}\n"));
        }
        fs::write(out_dir.join(RUN_MANIFEST_FILE), text)
    }
}

fn unix_now() -> String {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".to_string())
}

/// SHA-256 over a file's bytes, or over (relative path, bytes) pairs of a
/// directory tree in sorted order.
pub fn digest_path(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files: Vec<_> = walkdir::WalkDir::new(path)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .map(|e| e.into_path())
            .collect();
        files.sort();
        for file in files {
            let rel = file.strip_prefix(path).unwrap_or(&file);
            hasher.update(rel.to_string_lossy().as_bytes());
            let mut f = fs::File::open(&file)?;
            let mut buf = Vec::new();
            f.read_to_end(&mut buf)?;
            hasher.update(&buf);
        }
    } else {
        let mut f = fs::File::open(path)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        hasher.update(&buf);
    }
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_written_once_per_out_dir() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("mine");
        m.set("seed", "7");
        m.finish(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(RUN_MANIFEST_FILE)).unwrap();
        assert!(text.contains("subcommand=mine"));
        assert!(text.contains("seed=7"));
        let count = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .contains("manifest")
            })
            .count();
        assert_eq!(count, 1);
    }

    #[test]
    fn directory_digest_is_content_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.java"), "class A {}").unwrap();
        let d1 = digest_path(dir.path()).unwrap();
        fs::write(dir.path().join("a.java"), "class B {}").unwrap();
        let d2 = digest_path(dir.path()).unwrap();
        assert_ne!(d1, d2);
    }
}
