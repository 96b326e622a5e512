use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// Command-line arguments after the program name.
    pub argv: Vec<String>,
    /// Working directory the relative paths refer to.
    pub cwd: String,
    pub config: BTreeMap<String, String>,
    /// Input path to the SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub rng_algorithm: String,
    /// Output path to the SHA-256 of what was written.
    pub outputs: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
    /// Training outcome, for commands that train.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub result: BTreeMap<String, serde_json::Value>,
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Hash of a file, or of every file below a directory in sorted path order.
pub fn input_sha256(path: &Path) -> Result<String, CliError> {
    if !path.is_dir() {
        return file_sha256(path);
    }
    let mut files = Vec::new();
    collect(path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(path).unwrap_or(&f).to_string_lossy().as_bytes());
        h.update(fs::read(&f).map_err(|e| CliError::io(&f, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let p = entry.map_err(|e| CliError::io(dir, e))?.path();
        if p.is_dir() {
            collect(&p, out)?;
        } else if p.file_name().is_some_and(|n| n != "manifest.json") {
            out.push(p);
        }
    }
    Ok(())
}

static ARGV: OnceLock<Vec<String>> = OnceLock::new();

/// Records the arguments echoed into every manifest written by this process.
pub fn set_argv(argv: Vec<String>) {
    let _ = ARGV.set(argv);
}

pub struct Recorder {
    manifest: RunManifest,
    /// Recorded path and the path hashed at finish, which differ while a job
    /// directory still has its scratch name.
    pending: Vec<(String, PathBuf)>,
    start: Instant,
}

impl Recorder {
    pub fn new(command: &str, config: &BTreeMap<String, String>, seed: Option<u64>) -> Self {
        Recorder {
            manifest: RunManifest {
                schema_version: 1,
                command: command.to_string(),
                argv: ARGV.get().cloned().unwrap_or_default(),
                cwd: std::env::current_dir().map(|d| d.display().to_string()).unwrap_or_default(),
                config: config.clone(),
                inputs: BTreeMap::new(),
                seed,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                rng_algorithm: socgat::rng::RNG_ALGORITHM.to_string(),
                outputs: BTreeMap::new(),
                timings: BTreeMap::new(),
                result: BTreeMap::new(),
            },
            pending: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let h = input_sha256(path)?;
        self.manifest.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.pending.push((path.display().to_string(), path.to_path_buf()));
    }

    pub fn output_as(&mut self, recorded: &Path, actual: &Path) {
        self.pending.push((recorded.display().to_string(), actual.to_path_buf()));
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("result values serialize");
        self.manifest.result.insert(key.to_string(), v);
    }

    pub fn timing(&mut self, key: &str, seconds: f64) {
        self.manifest.timings.insert(key.to_string(), seconds);
    }

    /// Restarts the wall clock, for work that began before the recorder existed.
    pub fn since(mut self, start: Instant) -> Self {
        self.start = start;
        self
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.manifest.config.insert(key.to_string(), value.to_string());
    }

    /// Hashes the outputs and writes the manifest to `path`, stamping the
    /// total wall time.
    pub fn finish(mut self, path: &Path) -> Result<RunManifest, CliError> {
        for (recorded, actual) in &self.pending {
            self.manifest.outputs.insert(recorded.clone(), input_sha256(actual)?);
        }
        self.manifest
            .timings
            .insert("total_seconds".into(), self.start.elapsed().as_secs_f64());
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        write_atomic(path, text.as_bytes())?;
        Ok(self.manifest)
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// `DIR/manifest.json` for directory outputs, `FILE.manifest.json` otherwise.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut p = out.as_os_str().to_owned();
        p.push(".manifest.json");
        PathBuf::from(p)
    }
}
