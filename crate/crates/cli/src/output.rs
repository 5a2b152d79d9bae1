//! CSV tables and the output directory that records their checksums.
//!
//! Tables carry a single header comment line `# name(unit), ...` and no
//! other header. Floats use Rust's shortest round-trip exponent form, so a
//! value read back is bit-identical to the one written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(&'static str),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<&'static str> for Cell {
    fn from(x: &'static str) -> Self {
        Cell::Text(x)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    columns: Vec<(&'static str, &'static str)>,
    rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    /// Columns as `(name, unit)`; use `"1"` for dimensionless quantities.
    pub fn new(columns: &[(&'static str, &'static str)]) -> Self {
        CsvTable {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn header(&self) -> String {
        let cols: Vec<String> = self.columns.iter().map(|(n, u)| format!("{n}({u})")).collect();
        format!("# {}", cols.join(", "))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = self.header();
        s.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match c {
                    Cell::Float(x) => write!(s, "{x:e}"),
                    Cell::Int(x) => write!(s, "{x}"),
                    Cell::Text(x) => write!(s, "{x}"),
                }
                .expect("writing to a String cannot fail");
            }
            s.push('\n');
        }
        s.into_bytes()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An output directory and the checksum of every file written to it.
#[derive(Debug)]
pub struct OutputDir {
    path: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(OutputDir {
            path: path.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write `bytes` to the relative path `name`, creating parents.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.path.join(name);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&target, bytes).map_err(|e| CliError::io(&target, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<(), CliError> {
        self.write(name, &table.to_bytes())
    }

    /// Checksums keyed by relative path, in sorted order.
    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.files
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&[("t", "s"), ("R", "m"), ("side", "1")]);
        t.push(vec![0.0.into(), (-2e-4).into(), "left".into()]);
        t.push(vec![1.5e-9.into(), 0.1.into(), "right".into()]);
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(text, "# t(s), R(m), side(1)\n0e0,-2e-4,left\n1.5e-9,1e-1,right\n");
    }

    #[test]
    fn floats_round_trip() {
        for x in [1.0 / 3.0, 6.602e-25, -2039.2291, f64::MIN_POSITIVE] {
            let s = format!("{x:e}");
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
