//! Output-directory plumbing: atomic file writes and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Collects written artifacts so the manifest can list them last.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes via a temp file + rename so readers never see partial output.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let fin = self.dir.join(name);
        std::fs::write(&tmp, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, &fin)
            .map_err(|e| CliError::Io(format!("cannot finalize {}: {e}", fin.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes the manifest (config echo, versions, seeds, tolerances, file
    /// list). Always the last artifact of a command.
    pub fn finish(mut self, command: &str, config: &RunConfig) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            version: &'a str,
            config: &'a RunConfig,
            grid_n: usize,
            tol: f64,
            seed: u64,
            tie_tol: f64,
            outputs: &'a [String],
        }
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            grid_n: config.grid_n,
            tol: config.tol,
            seed: config.seed,
            tie_tol: config.tie_tol,
            outputs: &self.written,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Io(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        let tmp = self.dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, &text)
            .map_err(|e| CliError::Io(format!("cannot write manifest: {e}")))?;
        std::fs::rename(&tmp, self.dir.join("manifest.json"))
            .map_err(|e| CliError::Io(format!("cannot finalize manifest: {e}")))?;
        self.written.push("manifest.json".to_string());
        Ok(())
    }
}
