//! CSV tables and `key = value` summaries. Every float is written with 17
//! significant digits so outputs round-trip and diff byte-for-byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quasilinear::linalg::{CMatrix, RMatrix, C64};
use quasilinear::{Error, Result};

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column-named table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    lines: Vec<(String, String)>,
}

impl Summary {
    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.lines.push((key.into(), value.into()));
    }

    pub fn float(&mut self, key: impl Into<String>, value: f64) {
        self.text(key, float(value));
    }

    pub fn real_matrix(&mut self, key: &str, m: &RMatrix) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.float(format!("{key}_{}_{}", i + 1, j + 1), m[(i, j)]);
            }
        }
    }

    pub fn complex_matrix(&mut self, key: &str, m: &CMatrix) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.float(format!("{key}_re_{}_{}", i + 1, j + 1), m[(i, j)].re);
                self.float(format!("{key}_im_{}_{}", i + 1, j + 1), m[(i, j)].im);
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Column names `{prefix}_{i}_{j}` in row-major order.
pub fn matrix_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("{prefix}_{}_{}", i + 1, j + 1)))
        .collect()
}

pub fn real_cells(m: &RMatrix) -> Vec<String> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| float(m[(i, j)])))
        .collect()
}

pub fn complex_cells(m: &CMatrix, part: fn(C64) -> f64) -> Vec<String> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| float(part(m[(i, j)]))))
        .collect()
}

/// Output files of one pipeline run, in emission order. `failure` marks a
/// run whose outputs are a diagnosis rather than a result.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub failure: Option<Error>,
}

impl Artifacts {
    pub fn table(&mut self, name: &str, t: &Table) {
        self.files.push((name.into(), t.render()));
    }

    pub fn summary(&mut self, s: &Summary) {
        self.files.push(("summary.kv".into(), s.render()));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        self.files
            .iter()
            .map(|(name, content)| {
                let p = dir.join(name);
                std::fs::write(&p, content).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?;
                Ok(p)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_has_header() {
        let mut t = Table::new(vec!["t".into(), "x".into()]);
        t.push(vec![float(0.0), float(1.0)]);
        assert_eq!(t.render(), "t,x\n0.0000000000000000e0,1.0000000000000000e0\n");
    }

    #[test]
    fn matrix_columns_are_row_major() {
        assert_eq!(matrix_columns("p", 2, 2), ["p_1_1", "p_1_2", "p_2_1", "p_2_2"]);
    }
}
