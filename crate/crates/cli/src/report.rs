//! Output bookkeeping and the run report.

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use nvscc_core::io;

use crate::config::ScenarioConfig;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub preset: String,
    /// SHA-256 of command, resolved config, seed and input file bytes.
    pub input_digest: String,
    pub outputs: Vec<PathBuf>,
    /// Row counts and value ranges of ingested files.
    pub diagnostics: Vec<String>,
    pub seed: u64,
    pub wall_clock_s: f64,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "command: {} (preset {})", self.command, self.preset)?;
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "input digest: {}", self.input_digest)?;
        for d in &self.diagnostics {
            writeln!(f, "input: {d}")?;
        }
        for o in &self.outputs {
            writeln!(f, "wrote: {}", o.display())?;
        }
        writeln!(f, "wall clock: {:.3} s", self.wall_clock_s)
    }
}

pub fn input_digest(
    command: &str,
    config: &ScenarioConfig,
    seed: u64,
    inputs: &[&PathBuf],
) -> Result<String, CliError> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(config.canonical().as_bytes());
    h.update(seed.to_le_bytes());
    for p in inputs {
        let bytes = std::fs::read(p).map_err(|e| nvscc_core::Error::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Files written by a command plus its plain-text summary.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    diagnostics: Vec<String>,
    summary: String,
}

fn out_err(e: nvscc_core::Error) -> CliError {
    CliError::Output(e)
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            files: vec![],
            diagnostics: vec![],
            summary: String::new(),
        }
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let p = self.path(name);
        io::write_table(&p, header, rows).map_err(out_err)
    }

    pub fn xy(
        &mut self,
        name: &str,
        header: [&str; 2],
        rows: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<(), CliError> {
        let p = self.path(name);
        io::write_xy(&p, header, rows).map_err(out_err)
    }

    pub fn xyz(
        &mut self,
        name: &str,
        header: [&str; 3],
        rows: impl IntoIterator<Item = (f64, f64, f64)>,
    ) -> Result<(), CliError> {
        let p = self.path(name);
        io::write_xyz(&p, header, rows).map_err(out_err)
    }

    /// Run a writer from the core I/O module against a new output file.
    pub fn with<F>(&mut self, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&Path) -> nvscc_core::Result<()>,
    {
        let p = self.path(name);
        write(&p).map_err(out_err)
    }

    pub fn diag(&mut self, line: impl Into<String>) {
        self.diagnostics.push(line.into());
    }

    pub fn say(&mut self, line: impl AsRef<str>) {
        self.summary.push_str(line.as_ref());
        self.summary.push('\n');
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }

    pub fn write_summary(&mut self) -> Result<(), CliError> {
        let p = self.path("summary.txt");
        std::fs::write(&p, &self.summary).map_err(|e| {
            out_err(nvscc_core::Error::Io {
                path: p.display().to_string(),
                source: e,
            })
        })?;
        print!("{}", self.summary);
        Ok(())
    }
}

/// Percent with one decimal.
pub fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}
