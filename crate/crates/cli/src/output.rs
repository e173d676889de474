use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Writes one command's files into a directory, tagging each with the
/// config hash.
pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    pub fn new(dir: &Path, hash: String) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf(), hash })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// CSV with a `# config_hash=…` comment line ahead of the header.
    pub fn csv<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut buf = format!("# config_hash={}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
