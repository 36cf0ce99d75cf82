use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use ctbn_core::Result;

/// Record written next to every command's outputs. `arguments` replays the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub version: String,
    pub duration_seconds: f64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Output directory plus the list of files written into it.
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<String>,
    started: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new(), started: Instant::now() })
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never see a partial file.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let target = self.root.join(name);
        write_atomic(&target, contents)?;
        self.artifacts.push(name.to_string());
        Ok(target)
    }

    pub fn finish(
        self,
        command: &str,
        arguments: Vec<String>,
        parameters: serde_json::Value,
        seed: Option<u64>,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            arguments,
            parameters,
            seed,
            artifacts: self.artifacts,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_atomic(&self.root.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(manifest)
    }
}

pub fn write_atomic(target: &Path, contents: &[u8]) -> Result<()> {
    let dir = target.parent().unwrap_or_else(|| Path::new("."));
    let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, target) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}
