//! Run manifests: per-stage outcomes plus a checksummed file inventory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::scenario::hex;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const ARTIFACT: &str = "maglev";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestKind {
    Run,
    Sweep,
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Disabled,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub name: String,
    pub status: StageStatus,
    /// Energy-equivalent RMS displacement of the stage's axes [m].
    pub entry_rms_m: f64,
    pub exit_rms_m: Option<f64>,
    pub details: BTreeMap<String, Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub index: usize,
    pub value: String,
    pub seed: u64,
    pub directory: String,
    pub exit_code: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub kind: ManifestKind,
    pub scenario_sha256: String,
    pub seed: u64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<SweepRun>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub results: BTreeMap<String, Json>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(kind: ManifestKind, scenario_sha256: String, seed: u64) -> Self {
        Self {
            artifact: ARTIFACT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind,
            scenario_sha256,
            seed,
            complete: false,
            stages: Vec::new(),
            parameter: None,
            runs: Vec::new(),
            results: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageSummary> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn file(&self, path: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Output directory that records every file it writes.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Render into memory, then write and checksum.
    pub fn write_with<F>(&mut self, name: &str, render: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf).map_err(|e| CliError::io(self.root.join(name), e))?;
        self.write_bytes(name, &buf)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        self.record(name, bytes);
        Ok(())
    }

    /// Register a file written by someone else (e.g. a sub-run manifest).
    pub fn adopt(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex(&Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
    }

    /// Attach the inventory and write `manifest.json`.
    pub fn finish(&self, manifest: &mut Manifest) -> Result<PathBuf, CliError> {
        let mut files = self.files.clone();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = files;
        let path = self.root.join(MANIFEST_NAME);
        fs::write(&path, manifest.to_json()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_checksums_match_content() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_bytes("b/data.csv", b"abc").unwrap();
        out.write_with("a.txt", |w| w.write_all(b"")).unwrap();
        let mut m = Manifest::new(ManifestKind::Run, "00".into(), 1);
        let path = out.finish(&mut m).unwrap();
        assert_eq!(m.files[0].path, "a.txt");
        // sha256("abc")
        assert_eq!(
            m.file("b/data.csv").unwrap().sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(Manifest::load(&path).unwrap(), m);
    }
}
