//! Report files: CSV tables and the summary document.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::CliError;

/// A CSV file held in memory until the run finishes; every file has a
/// single writer.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file_name: &'static str, header: Vec<&'static str>) -> Self {
        Self {
            file_name,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: PathBuf::from(self.file_name),
            source: e.into_error(),
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_table(dir: &Path, table: &Table) -> Result<PathBuf, CliError> {
    let path = dir.join(table.file_name);
    write_file(&path, &table.to_bytes()?)?;
    Ok(path)
}

/// Writes `summary.txt`; its first line is a timestamp and is the only
/// part that differs between identical runs.
pub fn write_summary(dir: &Path, body: &str) -> Result<PathBuf, CliError> {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let path = dir.join("summary.txt");
    write_file(
        &path,
        format!("generated_at_unix: {now}\n{body}").as_bytes(),
    )?;
    Ok(path)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}
