//! CSV output: a `# config_hash=` comment line, a header, then rows.

use std::io::Write;

use crate::error::Result;

/// Scientific notation with 16 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.15e}")
    }
}

/// A value in a CSV row.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Real(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(v) => fmt_f64(*v),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub config_hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key=value` lines written after the rows.
    pub trailer: Vec<(String, String)>,
}

impl Table {
    pub fn new(config_hash: &str, header: &[&str]) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            trailer: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# config_hash={}", self.config_hash)?;
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        for (k, v) in &self.trailer {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|_| std::fmt::Error)?;
        f.write_str(std::str::from_utf8(&buf).map_err(|_| std::fmt::Error)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_have_sixteen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.000000000000000e-1");
        assert_eq!(fmt_f64(-1234.5), "-1.234500000000000e3");
        let v = 1.0 / 3.0;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("abc", &["a", "b"]);
        t.push(vec!["x".into(), 2.0.into()]);
        t.trailer.push(("rate".into(), fmt_f64(3.0)));
        assert_eq!(
            t.to_string(),
            "# config_hash=abc\na,b\nx,2.000000000000000e0\n# rate=3.000000000000000e0\n"
        );
    }
}
