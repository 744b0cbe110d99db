//! Run manifests: what a command was given and what it wrote.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub command_line: Vec<String>,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub seed: Option<u64>,
    /// Path to sha256 hex digest.
    pub config_digests: BTreeMap<String, String>,
    pub input_digests: BTreeMap<String, String>,
    pub output_digests: BTreeMap<String, String>,
    pub notes: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &str, command_line: Vec<String>, seed: Option<u64>) -> Self {
        let timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            command: command.to_string(),
            command_line,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix,
            seed,
            config_digests: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            output_digests: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    fn digest_into(map: &mut BTreeMap<String, String>, path: &Path) -> io::Result<()> {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            entries.sort();
            for p in entries.into_iter().filter(|p| p.is_file()) {
                map.insert(p.display().to_string(), sha256_file(&p)?);
            }
        } else {
            map.insert(path.display().to_string(), sha256_file(path)?);
        }
        Ok(())
    }

    /// Directories contribute one digest per regular file they contain.
    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        Self::digest_into(&mut self.input_digests, path)
    }

    pub fn add_config(&mut self, path: &Path) -> io::Result<()> {
        Self::digest_into(&mut self.config_digests, path)
    }

    pub fn add_output(&mut self, path: &Path) -> io::Result<()> {
        Self::digest_into(&mut self.output_digests, path)
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.insert(key.to_string(), value.to_string());
    }

    /// Writes `<dir>/<command>.manifest.json` and returns its path.
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.command));
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> io::Result<RunManifest> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(io::Error::other)
    }
}
