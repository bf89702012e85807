//! Output directory bookkeeping: artifact files, the summary and the manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;

pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub size: u64,
    pub sha256: String,
}

/// Files written into one output directory, in write order.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    files: Vec<FileEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of `blob <len>\0<content>`, the git object hash of the content.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    fn record(&mut self, rel: &str) -> Result<()> {
        let bytes = fs::read(self.root.join(rel))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            size: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Write a file through a buffered writer and record it.
    pub fn write_with<F>(&mut self, rel: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        drop(w);
        self.record(rel)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.write_with(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// CSV of a single column sampled at `t`.
    pub fn write_series(&mut self, rel: &str, header: &str, t: &[f64], values: &[f64]) -> Result<()> {
        self.write_with(rel, |w| {
            writeln!(w, "t,{header}")?;
            for (a, b) in t.iter().zip(values) {
                writeln!(w, "{a:.16e},{b:.16e}")?;
            }
            Ok(())
        })
    }

    /// CSV `index,value` of a state vector.
    pub fn write_vector(&mut self, rel: &str, values: &[f64]) -> Result<()> {
        self.write_with(rel, |w| {
            writeln!(w, "index,value")?;
            for (i, v) in values.iter().enumerate() {
                writeln!(w, "{i},{v:.16e}")?;
            }
            Ok(())
        })
    }

    /// Adopt the files of a nested output directory under `prefix`.
    pub fn adopt(&mut self, prefix: &str, nested: &[FileEntry]) {
        for f in nested {
            self.files.push(FileEntry {
                path: format!("{prefix}/{}", f.path),
                ..f.clone()
            });
        }
    }

    /// Write the summary, then a manifest listing every file including it.
    pub fn finish(
        mut self,
        command: &str,
        config: &ExperimentConfig,
        summary: &serde_json::Value,
        wall_time: f64,
    ) -> Result<Vec<FileEntry>> {
        self.write_json(SUMMARY_FILE, summary)?;
        let config_text = config.to_toml_string()?;
        let manifest = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "config_hash": content_hash(config_text.as_bytes()),
            "wall_time_seconds": wall_time,
            "files": &self.files,
        });
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(self.files)
    }
}
