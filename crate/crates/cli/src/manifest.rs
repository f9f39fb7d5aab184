use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command line after the program name.
    pub args: Vec<String>,
    /// Fully resolved parameters, defaults included.
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    /// Input path to SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
    /// Output key (`out` plus suffix) to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(MANIFEST_SUFFIX);
    PathBuf::from(s)
}

/// `out` plus whatever follows the out path, e.g. `out.plan` or
/// `out/bitext.tsv`.
pub fn output_key(out: &Path, file: &Path) -> String {
    let out_s = out.to_string_lossy();
    let file_s = file.to_string_lossy();
    match file_s.strip_prefix(out_s.as_ref()) {
        Some(rest) => format!("out{}", rest.replace('\\', "/")),
        None => file_s.into_owned(),
    }
}

pub fn digest_inputs(inputs: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    inputs.iter().map(|p| Ok((p.to_string_lossy().into_owned(), sha256_file(p)?))).collect()
}

pub fn digest_outputs(out: &Path, outputs: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    outputs.iter().map(|p| Ok((output_key(out, p), sha256_file(p)?))).collect()
}

impl RunManifest {
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = manifest_path(out);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
