//! Minimal CSV tables with `#`-prefixed metadata lines.

use std::fmt::Write as _;

use crate::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), ..Self::default() }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::LengthMismatch { expected: self.header.len(), actual: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_floats(&mut self, row: &[f64]) -> Result<()> {
        self.push(row.iter().map(|v| format_float(*v)).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parses text produced by [`Table::to_csv_string`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Table::default();
        let mut have_header = false;
        for (i, line) in text.lines().enumerate() {
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                let (k, v) = meta.split_once(':').unwrap_or((meta, ""));
                table.metadata.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if !have_header {
                table.header = cells;
                have_header = true;
            } else if cells.len() != table.header.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", table.header.len(), cells.len()),
                });
            } else {
                table.rows.push(cells);
            }
        }
        Ok(table)
    }

    /// Values of a named column parsed as floats.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column named {name:?}")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[idx]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line: r + 1, message: format!("column {name}: {e}") })
            })
            .collect()
    }
}
