//! Flat `key=value` run record written into every output directory.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use rocp::{Error, Result, SolverConfig};

pub const FILE_NAME: &str = "manifest.txt";

#[derive(Debug, Default, Clone)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        let mut m = Self::default();
        m.set("subcommand", subcommand);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn solver(&mut self, c: &SolverConfig) {
        self.set("tau", c.tau);
        self.set("alpha", c.alpha);
        self.set("delta", c.delta);
        self.set("max_iter", c.max_iter);
        self.set("tol", c.tol);
        self.set("primal_tol", c.primal_tol);
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Creates `dir` if needed and writes `dir/manifest.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let path = dir.join(FILE_NAME);
        fs::write(&path, self.render()).map_err(|e| io_error(&path, e))
    }
}

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}
