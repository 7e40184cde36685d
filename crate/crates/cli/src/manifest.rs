//! Run manifests: what was run, with which parameters, on which bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use distsim::content_hash;
use distsim::simlm::SimManifest;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    /// Relative to the manifest's directory when the file lies below it.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub seed: u64,
    pub params: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SimManifest>,
}

/// A file read in full, with its digest.
pub struct Loaded {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub sha256: String,
}

pub fn read_file(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let sha256 = content_hash(&bytes);
    Ok(Loaded {
        path: path.to_path_buf(),
        bytes,
        sha256,
    })
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    let io = |source| CliError::File {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)?;
    Ok(content_hash(bytes))
}

/// `<path>.manifest.json`.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    files: Vec<(bool, String, PathBuf, String)>,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64) -> Self {
        ManifestBuilder {
            manifest: RunManifest {
                tool: format!("distsim {}", env!("CARGO_PKG_VERSION")),
                command: command.to_string(),
                seed,
                params: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                model: None,
            },
            files: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("parameters serialize");
        self.manifest.params.insert(key.to_string(), v);
        self
    }

    pub fn input(&mut self, role: &str, file: &Loaded) -> &mut Self {
        self.files
            .push((true, role.into(), file.path.clone(), file.sha256.clone()));
        self
    }

    pub fn output(&mut self, role: &str, path: &Path, sha256: String) -> &mut Self {
        self.files.push((false, role.into(), path.to_path_buf(), sha256));
        self
    }

    pub fn model(&mut self, model: SimManifest) -> &mut Self {
        self.manifest.model = Some(model);
        self
    }

    /// Writes the manifest to `path`; file paths are stored relative to its directory where possible.
    pub fn write(mut self, path: &Path) -> Result<()> {
        let base = path.parent().map(absolute).unwrap_or_default();
        for (is_input, role, file, sha256) in self.files {
            let abs = absolute(&file);
            let stored = abs.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(abs);
            let digest = FileDigest {
                role,
                path: stored,
                sha256,
            };
            if is_input {
                self.manifest.inputs.push(digest);
            } else {
                self.manifest.outputs.push(digest);
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        bytes.push(b'\n');
        write_file(path, &bytes)?;
        Ok(())
    }
}

fn absolute(path: &Path) -> PathBuf {
    let p = if path.as_os_str().is_empty() {
        Path::new(".")
    } else {
        path
    };
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<(RunManifest, PathBuf)> {
        let file = read_file(path)?;
        let manifest = serde_json::from_slice(&file.bytes).map_err(distsim::Error::from)?;
        let base = path.parent().map(absolute).unwrap_or_default();
        Ok((manifest, base))
    }

    fn find(&self, role: &str) -> Option<&FileDigest> {
        self.inputs.iter().chain(&self.outputs).find(|f| f.role == role)
    }

    /// Loads the file recorded under `role` and checks its digest.
    pub fn load_verified(&self, role: &str, base: &Path) -> Result<Loaded> {
        let entry = self
            .find(role)
            .ok_or_else(|| CliError::Integrity(format!("manifest records no {role} file")))?;
        let file = read_file(&base.join(&entry.path))?;
        if file.sha256 != entry.sha256 {
            return Err(CliError::Integrity(format!(
                "{} has sha256 {} but the manifest records {}",
                file.path.display(),
                file.sha256,
                entry.sha256
            )));
        }
        Ok(file)
    }
}
