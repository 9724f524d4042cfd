use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vrf_sentinel::{Error, Result};

use crate::args::Command;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of one run: everything needed to repeat it and check the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub log_level: String,
    /// Resolved arguments, paths made absolute.
    pub config: Command,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written, keyed by path relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    /// Present for iterative detectors; false when one stopped at its iteration limit.
    pub converged: Option<bool>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Incompatible(format!("{}: not a run manifest: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Files under `dir`, recursively, sorted.
fn files_under(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn slash_path(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Hashes of a file, or of every file inside a directory.
pub fn hash_inputs(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths {
        if p.is_dir() {
            for f in files_under(p)? {
                out.insert(f.display().to_string(), sha256_file(&f)?);
            }
        } else {
            out.insert(p.display().to_string(), sha256_file(p)?);
        }
    }
    Ok(out)
}

/// Hashes of everything in the output directory except the manifest.
pub fn hash_outputs(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for f in files_under(dir)? {
        let rel = f.strip_prefix(dir).expect("listed under dir");
        if rel == Path::new(MANIFEST_NAME) {
            continue;
        }
        out.insert(slash_path(rel), sha256_file(&f)?);
    }
    Ok(out)
}
