//! Run output directory: CSV/JSON writers with content digests and the
//! run manifest.
//!
//! Every subcommand writes its data files through an [`OutputDir`], which
//! records a SHA-256 digest of each file as it lands. [`OutputDir::finish`]
//! then writes `manifest.json` — last, so the manifest always describes a
//! complete run — carrying the artifact version, the subcommand, the full
//! resolved parameter set, the seed, grid and unit system, wall-clock start
//! and end times, and the file index with digests. Timestamps live only in
//! the manifest; the data payloads are pure functions of the configuration,
//! so re-running with the same parameters reproduces them byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub version: &'a str,
    pub subcommand: &'a str,
    pub parameters: &'a serde_json::Map<String, serde_json::Value>,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<serde_json::Value>,
    pub units: serde_json::Value,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub files: &'a [FileDigest],
}

/// Everything a subcommand hands back for the manifest besides the files.
pub struct ManifestHead {
    pub subcommand: &'static str,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub grid: Option<serde_json::Value>,
    pub units: serde_json::Value,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileDigest>,
    started: f64,
}

fn now_unix_s() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| {
            CliError::Io(format!("cannot create output directory {}: {e}", root.display()))
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: now_unix_s(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        self.files.push(FileDigest {
            name: name.to_string(),
            sha256: hex,
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Write a CSV file: a header row, then one comma-joined row per record.
    /// Values are pre-rendered strings; numbers should come through
    /// [`fmt_f64`] so floats round-trip exactly.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut out = String::new();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len(), "row width must match header");
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.write_bytes(name, out.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Io(format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Write `manifest.json` and close the run. The manifest indexes every
    /// file written so far and is itself excluded from the digest list.
    pub fn finish(mut self, head: &ManifestHead) -> Result<(), CliError> {
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION"),
            subcommand: head.subcommand,
            parameters: &head.parameters,
            seed: head.seed,
            grid: head.grid.clone(),
            units: head.units.clone(),
            started_unix_s: self.started,
            finished_unix_s: now_unix_s(),
            files: &self.files,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Io(format!("cannot serialize manifest: {e}")))?;
        bytes.push(b'\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, &bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.clear();
        Ok(())
    }
}

/// Shortest-round-trip decimal rendering (Rust's float `Display`), so CSV
/// payloads are bit-faithful and byte-stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head() -> ManifestHead {
        ManifestHead {
            subcommand: "evolve",
            parameters: serde_json::Map::new(),
            seed: Some(7),
            grid: None,
            units: serde_json::json!({"hbar": 1.0, "mass": 1.0}),
        }
    }

    #[test]
    fn manifest_indexes_every_payload_with_matching_digests() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_csv("data.csv", &["t", "x"], vec![vec!["0".into(), "1.5".into()]])
            .unwrap();
        out.write_json("summary.json", &serde_json::json!({"ok": true}))
            .unwrap();
        out.finish(&head()).unwrap();

        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        let files = manifest["files"].as_array().unwrap();
        assert_eq!(files.len(), 2);
        for entry in files {
            let name = entry["name"].as_str().unwrap();
            let body = fs::read(dir.path().join(name)).unwrap();
            let mut hasher = Sha256::new();
            hasher.update(&body);
            let hex: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
            assert_eq!(entry["sha256"].as_str().unwrap(), hex, "digest of {name}");
            assert_eq!(entry["bytes"].as_u64().unwrap(), body.len() as u64);
        }
        assert!(manifest["finished_unix_s"].as_f64().unwrap()
            >= manifest["started_unix_s"].as_f64().unwrap());
    }

    #[test]
    fn csv_writer_emits_header_then_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_csv(
            "rows.csv",
            &["trajectory_id", "t", "x"],
            (0..2).map(|i| vec![i.to_string(), fmt_f64(0.5 * i as f64), fmt_f64(-1.25)]),
        )
        .unwrap();
        out.finish(&head()).unwrap();
        let text = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert_eq!(text, "trajectory_id,t,x\n0,0,-1.25\n1,0.5,-1.25\n");
    }

    #[test]
    fn float_rendering_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 6.02e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
