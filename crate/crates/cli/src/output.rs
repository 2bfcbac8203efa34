//! Table and report writers. Tables are CSV with the embedded configuration
//! on a leading `# ` line; reports and configs are JSON. Every file is
//! written to a temporary sibling and renamed into place, so readers never
//! see a partial file.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::Embedded;

fn atomic_write(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let tmp = NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

/// Formats a float for a table cell; missing values are empty cells.
pub fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write_table(
    path: &Path,
    config: &Embedded,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "# {}", config.to_json())?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(header)?;
        for row in rows {
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// A JSON report with its configuration attached under `config`.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub config: &'a Embedded,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn write_report<T: Serialize>(path: &Path, config: &Embedded, body: &T) -> Result<()> {
    write_json(path, &Report { config, body })
}

/// Data rows of a table written by [`write_table`], header included.
pub fn read_table(path: &Path) -> Result<(Embedded, Vec<csv::StringRecord>)> {
    let config = Embedded::read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let rows = reader.records().collect::<Result<Vec<_>, _>>()?;
    Ok((config, rows))
}

/// Progress lines on standard error.
#[derive(Debug, Clone, Copy, Default)]
pub struct Progress {
    pub quiet: bool,
}

impl Progress {
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}
