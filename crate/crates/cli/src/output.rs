use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

/// Files written under the output directory, recorded for the manifest.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes with a closure that fills a byte buffer, as the CSV writers expect.
    pub fn write_with<E: std::fmt::Display>(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        self.write(name, &buf)
    }

    /// Echoes the resolved configuration and writes `manifest.json`.
    pub fn finish(mut self, command: &str, resolved: &Value) -> Result<(), CliError> {
        self.write_json("config.json", resolved)?;
        let manifest = json!({
            "command": command,
            "version": decompound::VERSION,
            "files": self.files,
            "config": resolved,
        });
        self.write_json("manifest.json", &manifest)
    }
}

/// CSV with one column per slice, all of equal length.
pub fn columns_csv(buf: &mut Vec<u8>, headers: &[&str], columns: &[&[f64]]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(headers)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}
