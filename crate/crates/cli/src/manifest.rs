use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use mimeforge::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    parallel_build: bool,
    inputs: Vec<InputHash>,
    outputs: Vec<String>,
    config: &'a RunConfig,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Output directory of one command: records the files it writes, then the
/// resolved config and a manifest with input hashes.
pub struct OutDir {
    pub dir: PathBuf,
    outputs: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
        Ok(OutDir { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    /// Path of output `name`, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn finish(mut self, command: &str, cfg: &RunConfig, inputs: &[&Path]) -> Result<()> {
        let inputs = inputs
            .iter()
            .map(|p| Ok(InputHash { path: p.display().to_string(), sha256: sha256_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        write_json(&self.dir.join(CONFIG_FILE), cfg)?;
        self.outputs.sort();
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            parallel_build: mimeforge::par::parallel_enabled(),
            inputs,
            outputs: self.outputs,
            config: cfg,
        };
        write_json(&self.dir.join(MANIFEST_FILE), &m)
    }
}
