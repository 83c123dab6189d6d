//! Output files: stamped CSV tables, JSON reports, atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

/// Round-trip exact decimal form (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text: a `#` provenance line, a header row, then data rows.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(stamp: &str, header: &[&str]) -> Self {
        let mut text = format!("# {stamp}\n");
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(c.as_ref());
            first = false;
        }
        self.text.push('\n');
    }

    pub fn numbers(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&x| num(x)));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Collects the files a command writes into one output directory.
pub struct OutputDir {
    dir: PathBuf,
    pub written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::invalid(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Write through a temporary file in the same directory, then rename.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), Failure> {
        let target = self.dir.join(name);
        let fail =
            |e: std::io::Error| Failure::invalid(format!("cannot write {}: {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(fail)?;
        tmp.write_all(contents).map_err(fail)?;
        tmp.as_file().sync_all().map_err(fail)?;
        tmp.persist(&target).map_err(|e| fail(e.error))?;
        self.written.push(target.display().to_string());
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: Table) -> Result<(), Failure> {
        self.write(name, &table.into_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| Failure::invalid(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}
