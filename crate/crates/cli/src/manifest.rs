//! Per-run output directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use monsoon_core::autodiff::write_atomic;
use serde::{Deserialize, Serialize};

use crate::settings::usage;
use crate::store::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputFingerprint {
    pub name: String,
    pub location: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub started_utc: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputFingerprint>,
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub annotations: serde_json::Map<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_utc: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            seed,
            config,
            inputs: vec![],
            args: std::env::args().collect(),
            annotations: Default::default(),
        }
    }

    pub fn add_input(&mut self, name: &str, location: &str, bytes: &[u8]) {
        self.inputs.push(InputFingerprint {
            name: name.into(),
            location: location.into(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn add_file(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.add_input(name, &path.display().to_string(), &bytes);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(
            &dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(self)?.as_bytes(),
        )?;
        Ok(())
    }
}

/// `explicit` if given (it must be absent or empty), otherwise a fresh
/// `<root>/<timestamp>-<command>` directory.
pub fn create_run_dir(root: &Path, command: &str, explicit: Option<&Path>) -> Result<PathBuf> {
    if let Some(dir) = explicit {
        if dir.exists() && fs::read_dir(dir)?.next().is_some() {
            return Err(usage(format!(
                "run directory {} is not empty",
                dir.display()
            )));
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        return Ok(dir.to_path_buf());
    }
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    for n in 1.. {
        let name = if n == 1 {
            format!("{stamp}-{command}")
        } else {
            format!("{stamp}-{command}-{n}")
        };
        let dir = root.join(name);
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_are_unique_and_explicit_dirs_must_be_empty() {
        let root = tempfile::tempdir().unwrap();
        let a = create_run_dir(root.path(), "train", None).unwrap();
        let b = create_run_dir(root.path(), "train", None).unwrap();
        assert_ne!(a, b);
        assert!(a.file_name().unwrap().to_str().unwrap().ends_with("-train"));
        fs::write(a.join("x"), "1").unwrap();
        assert!(create_run_dir(root.path(), "train", Some(&a)).is_err());
        assert_eq!(create_run_dir(root.path(), "train", Some(&b)).unwrap(), b);
    }
}
