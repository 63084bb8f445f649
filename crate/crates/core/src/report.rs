//! Report plumbing: provenance, CSV tables and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats cells for CSV rows.
#[macro_export]
macro_rules! row {
    ($($cell:expr),* $(,)?) => {
        vec![$($cell.to_string()),*]
    };
}

/// Identifies the exact inputs of a report. The hash covers the canonical JSON
/// of the effective config, defaults included, with keys sorted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub package: &'static str,
    pub version: &'static str,
    pub effective_config: serde_json::Value,
}

impl Provenance {
    pub fn of<C: Serialize>(config: &C) -> Result<Self> {
        let effective_config = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
        let canonical = serde_json::to_vec(&effective_config).map_err(|e| Error::Config(e.to_string()))?;
        let digest = Sha256::digest(&canonical);
        Ok(Provenance {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            package: env!("CARGO_PKG_NAME"),
            version: VERSION,
            effective_config,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Writes each table as `<dir>/<name>.csv` and returns the paths.
pub fn write_tables(dir: &Path, tables: &[Table]) -> Result<Vec<PathBuf>> {
    tables
        .iter()
        .map(|t| {
            let path = dir.join(format!("{}.csv", t.name));
            write_atomic(&path, &t.to_csv()?)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_header() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(row![1.5, "x,y"]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1.5,\"x,y\"\n");
    }

    #[test]
    fn provenance_hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"x":1,"y":[1,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"y":[1,2],"x":1}"#).unwrap();
        let (pa, pb) = (Provenance::of(&a).unwrap(), Provenance::of(&b).unwrap());
        assert_eq!(pa.config_sha256, pb.config_sha256);
        assert_eq!(pa.config_sha256.len(), 64);
        assert_ne!(pa.config_sha256, Provenance::of(&1).unwrap().config_sha256);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
