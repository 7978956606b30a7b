use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifies what produced an output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn csv_comment(&self) -> String {
        format!(
            "# hjlab {VERSION} command={} config={} seed={}\n",
            self.command, self.config_hash, self.seed
        )
    }

    pub fn json_line(&self) -> String {
        let v = serde_json::json!({
            "record": "provenance",
            "tool": "hjlab",
            "version": VERSION,
            "command": self.command,
            "config": self.config_hash,
            "seed": self.seed,
        });
        format!("{v}\n")
    }
}

/// A file content comparison failed under `--verify`.
#[derive(Debug)]
pub struct VerifyMismatch(pub Vec<PathBuf>);

impl std::fmt::Display for VerifyMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "re-derived output differs from the file on disk:")?;
        for p in &self.0 {
            write!(f, " {}", p.display())?;
        }
        Ok(())
    }
}

impl std::error::Error for VerifyMismatch {}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes (or, with `verify`, compares) files below one directory.
#[derive(Debug)]
pub struct Outputs {
    pub dir: PathBuf,
    pub provenance: Provenance,
    pub verify: bool,
    pub written: Vec<PathBuf>,
    pub mismatched: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>, provenance: Provenance, verify: bool) -> Self {
        Outputs {
            dir: dir.into(),
            provenance,
            verify,
            written: Vec::new(),
            mismatched: Vec::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV with a provenance comment line and a column header.
    pub fn csv(&mut self, name: &str, columns: &str, body: &str) -> anyhow::Result<PathBuf> {
        let content = format!("{}{columns}\n{body}", self.provenance.csv_comment());
        self.put(name, &content)
    }

    /// JSON lines preceded by a provenance record.
    pub fn jsonl(&mut self, name: &str, body: &str) -> anyhow::Result<PathBuf> {
        let content = format!("{}{body}", self.provenance.json_line());
        self.put(name, &content)
    }

    pub fn put(&mut self, name: &str, content: &str) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        if self.verify {
            let existing = fs::read(&path)
                .with_context(|| format!("reading {} for verification", path.display()))?;
            if sha256_hex(&existing) != sha256_hex(content.as_bytes()) {
                self.mismatched.push(path.clone());
            }
            return Ok(path);
        }
        write_atomic(&path, content.as_bytes())?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn finish(self) -> anyhow::Result<Vec<PathBuf>> {
        if !self.mismatched.is_empty() {
            return Err(VerifyMismatch(self.mismatched).into());
        }
        Ok(self.written)
    }
}

/// Writes through a temporary sibling and renames, so a file is either absent or complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)
        .with_context(|| format!("writing {}", tmp.display()))?;
    f.sync_all().ok();
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Reads the provenance record from the first line of a JSON-lines file.
pub fn read_provenance(path: &Path) -> Option<serde_json::Value> {
    let text = fs::read_to_string(path).ok()?;
    let first = text.lines().next()?;
    let v: serde_json::Value = serde_json::from_str(first).ok()?;
    (v.get("record")?.as_str()? == "provenance").then_some(v)
}
