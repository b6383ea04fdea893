//! Output directories and the manifest that describes them.
//!
//! Every command writes its artifacts through [`Artifacts`], which records a
//! SHA-256 digest per file. [`Artifacts::finish`] then writes `manifest.json`
//! holding the effective configuration, its digest, the seed, tool versions
//! and the run status. A failed run still gets a manifest listing whatever
//! was written before the failure.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::{CliResult, Failure};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            cli: env!("CARGO_PKG_VERSION").to_owned(),
            core: stmado::VERSION.to_owned(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub versions: Versions,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Failure::from(e).context(path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Digest of a configuration value. `serde_json` maps keep keys sorted, so
/// equal configurations hash equally regardless of input key order.
pub fn config_digest(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(config).expect("JSON values always serialize"),
    ))
}

pub struct Artifacts {
    dir: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| Failure::from(e).context(dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.records
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::from(e).context(path.display()))?;
        let record = ArtifactRecord {
            path: name.to_owned(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        };
        match self.records.iter_mut().find(|r| r.path == name) {
            Some(existing) => *existing = record,
            None => self.records.push(record),
        }
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Renders into memory with `render`, then writes and records the file.
    pub fn write_with<F>(&mut self, name: &str, render: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> stmado::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    /// Writes serializable rows as CSV with a header taken from the field names.
    pub fn write_csv_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::config(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    /// Writes a field CSV and its metadata sidecar.
    pub fn write_field(
        &mut self,
        stem: &str,
        field: &stmado::SpaceTimeField,
        meta: &stmado::field::FieldMeta,
    ) -> CliResult<()> {
        self.write_with(&format!("{stem}.csv"), |buf| field.write_csv(buf))?;
        self.write_json(&format!("{stem}.json"), meta)
    }

    /// Writes `manifest.json` describing the run and returns it.
    pub fn finish(
        self,
        command: &str,
        seed: Option<u64>,
        config: serde_json::Value,
        error: Option<&Failure>,
    ) -> CliResult<Manifest> {
        let manifest = Manifest {
            command: command.to_owned(),
            versions: Versions::current(),
            seed,
            config_sha256: config_digest(&config),
            config,
            status: if error.is_none() {
                RunStatus::Complete
            } else {
                RunStatus::Failed
            },
            error: error.map(|e| e.to_string()),
            outputs: self.records,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, bytes).map_err(|e| Failure::from(e).context(path.display()))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a": 1, "b": [2, 3]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b": [2, 3], "a": 1}"#).unwrap();
        assert_eq!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 64);
    }

    #[test]
    fn records_follow_rewrites() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Artifacts::create(dir.path()).unwrap();
        out.write_bytes("x.txt", b"one").unwrap();
        out.write_bytes("x.txt", b"three").unwrap();
        assert_eq!(out.records().len(), 1);
        assert_eq!(out.records()[0].bytes, 5);
        let m = out.finish("demo", Some(1), serde_json::json!({"k": 1}), None).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
        assert_eq!(Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }

    #[test]
    fn failed_runs_keep_their_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Artifacts::create(dir.path()).unwrap();
        out.write_bytes("partial.csv", b"a\n").unwrap();
        let m = out
            .finish("demo", None, serde_json::json!({}), Some(&Failure::numeric("diverged")))
            .unwrap();
        assert_eq!(m.status, RunStatus::Failed);
        assert_eq!(m.error.as_deref(), Some("diverged"));
        assert_eq!(m.outputs[0].path, "partial.csv");
    }
}
