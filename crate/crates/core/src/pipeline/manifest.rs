use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use crate::corpusio::create_writer;
use crate::error::{Error, Result};
use crate::substitute::GenerationStats;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one command run. Everything except `timings_ms` is a function
/// of the configuration and the input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: PipelineConfig,
    pub inputs: BTreeMap<String, InputRecord>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub counts: BTreeMap<String, u64>,
    pub stats: Option<GenerationStats>,
    pub cache: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            stats: None,
            cache: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, name: &str, path: &Path) -> Result<&InputRecord> {
        let (sha256, bytes) = sha256_file(path)?;
        self.inputs.insert(
            name.to_string(),
            InputRecord {
                path: path.to_path_buf(),
                sha256,
                bytes,
            },
        );
        Ok(&self.inputs[name])
    }

    pub fn checksum(&self, name: &str) -> Option<&str> {
        self.inputs.get(name).map(|r| r.sha256.as_str())
    }

    pub fn count(&mut self, name: &str, value: u64) {
        self.counts.insert(name.to_string(), value);
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.to_string(), path.to_path_buf());
    }

    /// Run `f` as a named stage: its wall time is recorded and its error is
    /// tagged with the stage name.
    pub fn stage<R>(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&mut Self) -> Result<R>,
    ) -> Result<R> {
        let start = Instant::now();
        let out = f(self).map_err(|e| match e {
            e @ Error::Stage { .. } | e @ Error::Config(_) => e,
            e => Error::Stage {
                stage: name,
                source: Box::new(e),
            },
        });
        *self.timings_ms.entry(name.to_string()).or_default() += start.elapsed().as_millis() as u64;
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut w = create_writer(path)?;
        w.write_all(self.to_json().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Hex SHA-256 and size of a file, read in blocks.
pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex(&h.finalize()), total))
}

pub(crate) fn sha256_text(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
