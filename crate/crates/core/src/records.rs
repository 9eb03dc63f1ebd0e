//! Line-oriented JSON persistence helpers.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

/// Records carrying a mandatory format version.
pub trait Versioned {
    fn format_version(&self) -> u32;
}

pub fn check_version<T: Versioned>(value: &T, path: &Path) -> Result<()> {
    if value.format_version() != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            path: path.to_path_buf(),
            found: value.format_version(),
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Pretty JSON with a trailing newline. Writes through a temp file and a
/// rename so readers never see a torn record.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension(format!(
        "tmp.{}.{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn read_versioned<T: DeserializeOwned + Versioned>(path: &Path) -> Result<T> {
    // Peek at the version first so a future schema reports a version error
    // rather than a field error.
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    let found = raw
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Data(format!("{}: missing format_version", path.display())))?;
    if found != FORMAT_VERSION as u64 {
        return Err(Error::FormatVersion {
            path: path.to_path_buf(),
            found: found as u32,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(raw).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Reads one record per line. A trailing partial line (interrupted append)
/// is skipped with a warning; malformed lines elsewhere are errors.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let last = lines.len().saturating_sub(1);
    let mut out = Vec::with_capacity(lines.len());
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(e) if n == last => {
                log::warn!("{}: skipping torn final line: {e}", path.display());
            }
            Err(e) => {
                return Err(Error::json(format!("{}:{}", path.display(), n + 1), e));
            }
        }
    }
    Ok(out)
}

/// Append-only log writer.
pub struct AppendLog {
    path: std::path::PathBuf,
    writer: BufWriter<File>,
}

impl AppendLog {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(AppendLog {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let mut line = serde_json::to_vec(record)
            .map_err(|e| Error::json(self.path.display().to_string(), e))?;
        line.push(b'\n');
        self.writer
            .write_all(&line)
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Rec {
        format_version: u32,
        x: i32,
    }

    #[test]
    fn torn_final_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        fs::write(&path, "{\"format_version\":1,\"x\":1}\n{\"format_version\":1,\"x\"").unwrap();
        let recs: Vec<Rec> = read_jsonl(&path).unwrap();
        assert_eq!(recs, vec![Rec { format_version: 1, x: 1 }]);
    }

    #[test]
    fn malformed_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        fs::write(&path, "garbage\n{\"format_version\":1,\"x\":1}\n").unwrap();
        assert!(read_jsonl::<Rec>(&path).is_err());
    }

    #[test]
    fn wrong_version_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        fs::write(&path, "{\"format_version\":7,\"x\":1}").unwrap();
        assert!(matches!(
            read_versioned::<Rec>(&path),
            Err(Error::FormatVersion { found: 7, .. })
        ));
    }

    impl Versioned for Rec {
        fn format_version(&self) -> u32 {
            self.format_version
        }
    }

    #[test]
    fn append_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        {
            let mut log = AppendLog::open(&path).unwrap();
            log.append(&Rec { format_version: 1, x: 1 }).unwrap();
            log.flush().unwrap();
        }
        let mut log = AppendLog::open(&path).unwrap();
        log.append(&Rec { format_version: 1, x: 2 }).unwrap();
        log.flush().unwrap();
        let recs: Vec<Rec> = read_jsonl(&path).unwrap();
        assert_eq!(recs.len(), 2);
    }
}
