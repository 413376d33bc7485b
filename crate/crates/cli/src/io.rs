//! File helpers: atomic writes, JSON, CSV tables and the run log.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn resource(context: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Resource(format!("{context} {}: {e}", path.display()))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| resource("cannot create directory", dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| resource("cannot write", &tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| resource("cannot rename into", path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_text(path: &Path, hint: &str) -> CliResult<String> {
    if !path.exists() {
        return Err(CliError::Data(format!("missing input {}{hint}", path.display())));
    }
    fs::read_to_string(path).map_err(|e| resource("cannot read", path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, hint: &str) -> CliResult<T> {
    let text = read_text(path, hint)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// CSV with a header row; the first column is a string id.
pub fn table_to_csv(header: &[String], ids: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (id, row) in ids.iter().zip(rows) {
        out.push_str(id);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub struct Table {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn table_from_csv(text: &str, path: &Path) -> CliResult<Table> {
    let bad = |line: usize, msg: String| CliError::Data(format!("{}: line {line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| bad(1, "empty table".into()))?;
    let columns = head.split(',').count();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (k, line) in lines {
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let row: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>().map_err(|_| bad(k + 1, format!("non-numeric value {f:?}"))))
            .collect::<CliResult<_>>()?;
        if row.len() + 1 != columns {
            return Err(bad(k + 1, format!("{} columns, header has {columns}", row.len() + 1)));
        }
        ids.push(id);
        rows.push(row);
    }
    Ok(Table { ids, rows })
}

/// Appends one JSON line to `<dir>/runlog.jsonl`.
pub fn append_run_log<T: Serialize>(dir: &Path, record: &T) -> CliResult<()> {
    let path: PathBuf = dir.join("runlog.jsonl");
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| resource("cannot open", &path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| resource("cannot append to", &path, e))
}
