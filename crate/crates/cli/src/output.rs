//! Output directory bookkeeping and run manifests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};

pub struct OutDir {
    root: PathBuf,
    files: Mutex<Vec<String>>,
}

impl OutDir {
    /// Creates the directory and checks that it is writable.
    pub fn create(root: impl Into<PathBuf>) -> Result<OutDir> {
        let root = root.into();
        std::fs::create_dir_all(&root)
            .map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", root.display())))?;
        let probe = root.join(".z2metts-write-test");
        File::create(&probe)
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| CliError::config(format!("output directory {} is not writable: {e}", root.display())))?;
        Ok(OutDir {
            root,
            files: Mutex::new(Vec::new()),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Opens `name` for writing and records it for the manifest.
    pub fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut files = self.files.lock().unwrap();
        if !files.iter().any(|f| f == name) {
            files.push(name.to_string());
        }
        Ok(BufWriter::new(f))
    }

    /// Writes a CSV file from a header and rows of preformatted fields.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_writer(self.writer(name)?);
        let err = |e: csv::Error| CliError::io(&path, e.into());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.root.join(name);
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(&path, e.into()))?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }

    pub fn with_writer(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> z2metts_core::Result<()>,
    ) -> Result<()> {
        let mut w = self.writer(name)?;
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(self.root.join(name), e))?;
        Ok(())
    }

    pub fn files(&self) -> Vec<String> {
        self.files.lock().unwrap().clone()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    version: &'a str,
    outputs: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Writes `manifest.json` with the fully resolved config. Re-running with
/// `--config manifest.json` reproduces every listed output.
pub fn write_manifest(out: &OutDir, kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<()> {
    let m = Manifest {
        experiment: kind.name(),
        version: env!("CARGO_PKG_VERSION"),
        outputs: out.files(),
        config: cfg,
    };
    out.json("manifest.json", &m)
}

/// Shortest round-trip float formatting, so reruns are byte-identical.
pub fn f(v: f64) -> String {
    format!("{v:?}")
}
