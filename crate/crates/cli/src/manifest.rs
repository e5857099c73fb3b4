//! Run manifests: what a stage read, what it wrote, and with which settings.
//!
//! Every input is recorded with its content hash and, when a manifest in the
//! input's directory lists it as an output, with that producer's manifest
//! hash. Manifests carry no timestamps, so a rerun on the same inputs writes
//! the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Producer {
    pub stage: String,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub producer: Option<Producer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a file, or of a directory as the sorted `relative-path  hash`
/// lines of every file below it.
pub fn content_hash(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut files = Vec::new();
        walk(path, path, &mut files)?;
        files.sort();
        let mut h = Sha256::new();
        for (rel, sum) in files {
            h.update(format!("{rel}  {sum}\n").as_bytes());
        }
        Ok(hex(&h.finalize()))
    } else {
        let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        Ok(hex(&Sha256::digest(&bytes)))
    }
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            walk(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("below root");
            out.push((rel.to_string_lossy().replace('\\', "/"), content_hash(&p)?));
        }
    }
    Ok(())
}

/// `path` relative to `base` when it lies below it.
pub fn display_path(path: &Path, base: &Path) -> String {
    let rel = match (path.canonicalize(), base.canonicalize()) {
        (Ok(p), Ok(b)) => p.strip_prefix(&b).map(Path::to_path_buf).ok(),
        _ => None,
    };
    rel.unwrap_or_else(|| path.to_path_buf())
        .to_string_lossy()
        .replace('\\', "/")
}

/// Looks for a manifest next to `path` that lists it as an output with the
/// same hash.
fn find_producer(path: &Path, sha: &str) -> Result<Option<Producer>> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let Ok(entries) = fs::read_dir(&dir) else {
        return Ok(None);
    };
    let mut manifests: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(SUFFIX))
        .collect();
    manifests.sort();
    let name = display_path(path, &dir);
    for m in manifests {
        let bytes = fs::read(&m)?;
        let Ok(parsed) = serde_json::from_slice::<Manifest>(&bytes) else {
            continue;
        };
        if parsed
            .outputs
            .iter()
            .any(|o| o.sha256 == sha && o.path == name)
        {
            return Ok(Some(Producer {
                stage: parsed.stage,
                manifest_sha256: hex(&Sha256::digest(&bytes)),
            }));
        }
    }
    Ok(None)
}

pub struct Recorder {
    out_dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(out_dir: &Path) -> Self {
        Self {
            out_dir: out_dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    /// Hashes everything and writes `<out_dir>/<stage>.manifest.json`.
    pub fn finish(self, stage: &str, seed: u64, config: Value) -> Result<PathBuf> {
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for p in &self.inputs {
            let sha256 = content_hash(p)?;
            inputs.push(Artifact {
                path: display_path(p, &self.out_dir),
                producer: find_producer(p, &sha256)?,
                sha256,
            });
        }
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                Ok(Artifact {
                    path: display_path(p, &self.out_dir),
                    sha256: content_hash(p)?,
                    producer: None,
                })
            })
            .collect::<Result<_>>()?;
        let m = Manifest {
            stage: stage.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs,
            outputs,
        };
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(format!("{stage}{SUFFIX}"));
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_hash_ignores_creation_order() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        fs::write(a.path().join("x"), "1").unwrap();
        fs::write(a.path().join("y"), "2").unwrap();
        fs::write(b.path().join("y"), "2").unwrap();
        fs::write(b.path().join("x"), "1").unwrap();
        assert_eq!(
            content_hash(a.path()).unwrap(),
            content_hash(b.path()).unwrap()
        );
        fs::write(b.path().join("x"), "3").unwrap();
        assert_ne!(
            content_hash(a.path()).unwrap(),
            content_hash(b.path()).unwrap()
        );
    }

    #[test]
    fn producer_chain() {
        let d = tempfile::tempdir().unwrap();
        let data = d.path().join("data.csv");
        fs::write(&data, "a\n1\n").unwrap();
        let mut r = Recorder::new(d.path());
        r.output(&data);
        let first = r.finish("make", 0, Value::Null).unwrap();
        let mut r = Recorder::new(d.path());
        r.input(&data);
        let second = r.finish("use", 0, Value::Null).unwrap();
        let m: Manifest = serde_json::from_slice(&fs::read(second).unwrap()).unwrap();
        let p = m.inputs[0].producer.as_ref().unwrap();
        assert_eq!(p.stage, "make");
        assert_eq!(p.manifest_sha256, content_hash(&first).unwrap());
    }
}
