//! Every command ends by writing `manifest.json`: the resolved config, a
//! checksum per data file, and the runtime. The manifest lands atomically
//! (tmp file + rename) after all data files, so its presence means the run
//! finished and its checksums let a rerun prove byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    cli: &'static str,
    core: &'static str,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    versions: Versions,
    seed: u64,
    workers: Option<usize>,
    config: &'a serde_json::Value,
    outputs: &'a [OutputRecord],
    runtime_seconds: f64,
}

/// Collects data files for one run and finishes with the manifest.
pub struct RunWriter {
    dir: PathBuf,
    command: String,
    seed: u64,
    workers: Option<usize>,
    started: Instant,
    outputs: Vec<OutputRecord>,
}

impl RunWriter {
    pub fn new(dir: &Path, command: &str, seed: u64, workers: Option<usize>) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::runtime(format!("cannot create output dir {}: {e}", dir.display()))
        })?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            workers,
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    /// Write one data file and record its checksum.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            bytes: contents.len() as u64,
            sha256: hex(&Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    /// Write the manifest last, atomically, and report the artifact list.
    pub fn finish(mut self, config_echo: &serde_json::Value) -> Result<()> {
        self.outputs.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = RunManifest {
            command: &self.command,
            versions: Versions { cli: env!("CARGO_PKG_VERSION"), core: abckit::VERSION },
            seed: self.seed,
            workers: self.workers,
            config: config_echo,
            outputs: &self.outputs,
            runtime_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::runtime(format!("manifest serialization: {e}")))?;
        let tmp = self.dir.join("manifest.json.tmp");
        let dest = self.dir.join("manifest.json");
        fs::write(&tmp, &text)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", tmp.display())))?;
        fs::rename(&tmp, &dest)
            .map_err(|e| CliError::runtime(format!("cannot finalize manifest: {e}")))?;
        for out in &self.outputs {
            println!("wrote {}", self.dir.join(&out.file).display());
        }
        println!("wrote {}", dest.display());
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
