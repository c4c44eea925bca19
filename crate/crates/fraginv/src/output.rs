//! CSV bundles.
//!
//! Every file starts with one `#` comment line carrying the configuration
//! fingerprint and grid parameters, followed by a header row and data rows.
//! Floats are written with 17 significant digits so that a file round-trips
//! bit-for-bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use fraginv_core::Grid;

/// Formats `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Provenance line written at the top of each CSV.
#[derive(Debug, Clone)]
pub struct Header {
    pub fingerprint: String,
    pub grid: String,
}

impl Header {
    pub fn line(&self) -> String {
        format!("# fraginv config_sha256={} {}", self.fingerprint, self.grid)
    }
}

/// Tracks the files written by one command so they can be removed if the
/// run fails part-way.
#[derive(Debug, Default)]
pub struct Bundle {
    written: Vec<PathBuf>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes a table whose cells are all floats.
    pub fn write_table(
        &mut self,
        path: &Path,
        header: &Header,
        columns: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> anyhow::Result<()> {
        self.write_rows(
            path,
            header,
            columns,
            rows.into_iter()
                .map(|r| r.into_iter().map(fmt_f64).collect::<Vec<_>>()),
        )
    }

    pub fn write_rows(
        &mut self,
        path: &Path,
        header: &Header,
        columns: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(path.to_path_buf());
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", header.line())?;
        writeln!(w, "{}", columns.join(","))?;
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    /// Deletes every file written so far.
    pub fn discard(&mut self) {
        for p in self.written.drain(..) {
            if let Err(e) = fs::remove_file(&p) {
                log::warn!("could not remove partial output {}: {e}", p.display());
            }
        }
    }
}

/// Reads one value per cell from a CSV profile.
///
/// Lines starting with `#` are ignored and the first remaining line is the
/// header. Values come from the column named `f` if present, otherwise from
/// the last column. When the first column is `x_center` its entries must
/// match the grid centres.
pub fn read_profile(path: &Path, grid: &Grid) -> anyhow::Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        bail!("{}: missing header row", path.display());
    }
    let col = headers.iter().position(|h| h == "f").unwrap_or(headers.len() - 1);
    let check_x = headers.get(0) == Some("x_center");
    let mut values = Vec::with_capacity(grid.len());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let value: f64 = record
            .get(col)
            .with_context(|| format!("{}: row {} is short", path.display(), row + 1))?
            .parse()
            .with_context(|| format!("{}: row {} is not a number", path.display(), row + 1))?;
        if check_x {
            let x: f64 = record[0].parse()?;
            if let Some(&c) = grid.centers().get(row) {
                if (x - c).abs() > 1e-9 * c.abs().max(1e-300) {
                    bail!("{}: row {} has x_center {x}, grid centre is {c}", path.display(), row + 1);
                }
            }
        }
        values.push(value);
    }
    if values.len() != grid.len() {
        bail!("{}: expected {} rows, found {}", path.display(), grid.len(), values.len());
    }
    Ok(values)
}
