//! Output directory bookkeeping: every file written goes into the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::scenario::Resolved;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub kind: &'static str,
    pub bytes: usize,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| {
            CliError::precondition(format!(
                "cannot create output directory {}: {e}",
                root.display()
            ))
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, kind: &'static str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, &bytes)
            .map_err(|e| CliError::precondition(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            kind,
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        for row in rows {
            w.serialize(row)
                .map_err(|e| CliError::precondition(format!("cannot serialize {name}: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::precondition(format!("cannot serialize {name}: {e}")))?;
        self.write(name, "csv", bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::precondition(format!("cannot serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, "json", bytes)
    }

    pub fn svg(&mut self, name: &str, svg: String) -> Result<(), CliError> {
        self.write(name, "svg", svg.into_bytes())
    }

    /// Writes `manifest.json` listing the files emitted so far.
    pub fn finish(self, run: &Resolved) -> Result<Vec<FileEntry>, CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            program: &'static str,
            version: &'static str,
            task: &'static str,
            engine: wva_core::Engine,
            seed: u64,
            files: &'a [FileEntry],
            scenario: &'a crate::scenario::Scenario,
        }
        let manifest = Manifest {
            program: "wva-sim",
            version: env!("CARGO_PKG_VERSION"),
            task: run.task.name(),
            engine: run.engine,
            seed: run.seed,
            files: &self.files,
            scenario: &run.scenario,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::precondition(format!("cannot serialize manifest: {e}")))?;
        bytes.push(b'\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, bytes)
            .map_err(|e| CliError::precondition(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.files)
    }
}
