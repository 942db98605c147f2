//! Run directories: tables as CSV or NDJSON, JSON reports, and a manifest
//! listing every file with its SHA-256.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
/// Environment variable naming the base directory for run outputs.
pub const OUT_DIR_ENV: &str = "SPINCHAOS_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Ndjson,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Ndjson => "ndjson",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    /// Resolved parameters, including defaults, as accepted by `--config`.
    pub config: Value,
    pub started_unix: u64,
    pub duration_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

/// Default run directory: `$SPINCHAOS_OUT_DIR/<subcommand>`, or
/// `spinchaos-out/<subcommand>` in the working directory.
pub fn default_dir(subcommand: &str) -> PathBuf {
    let base = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("spinchaos-out"));
    base.join(subcommand)
}

pub fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub struct Run {
    pub dir: PathBuf,
    pub format: Format,
    subcommand: String,
    seed: u64,
    config: Value,
    files: Vec<String>,
    started: Instant,
    started_unix: u64,
}

impl Run {
    pub fn create(dir: PathBuf, format: Format, subcommand: &str, seed: u64, config: Value) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Ok(Self {
            dir,
            format,
            subcommand: subcommand.to_string(),
            seed,
            config,
            files: Vec::new(),
            started: Instant::now(),
            started_unix,
        })
    }

    fn register(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    /// Writes `rows` to `<stem>.csv` or `<stem>.ndjson`.
    pub fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<(), CliError> {
        let name = format!("{stem}.{}", self.format.extension());
        let path = self.dir.join(&name);
        let mut w = TableWriter::create(&path, self.format)?;
        for r in rows {
            w.row(r)?;
        }
        w.finish()?;
        self.register(&name);
        Ok(())
    }

    /// Opens `<stem>.<ext>` for streaming rows; `append` keeps existing
    /// content (used when resuming).
    pub fn stream(&mut self, stem: &str, append_at: Option<u64>) -> Result<TableWriter, CliError> {
        let name = format!("{stem}.{}", self.format.extension());
        let path = self.dir.join(&name);
        self.register(&name);
        match append_at {
            None => TableWriter::create(&path, self.format),
            Some(len) => TableWriter::resume(&path, self.format, len),
        }
    }

    /// Pretty-printed JSON document.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        self.register(name);
        Ok(())
    }

    /// Writes the manifest; consumes the run.
    pub fn finish(self) -> Result<PathBuf, CliError> {
        let mut outputs = Vec::new();
        for name in &self.files {
            let path = self.dir.join(name);
            let (sha256, bytes) = digest(&path)?;
            outputs.push(OutputFile { path: name.clone(), sha256, bytes });
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: self.subcommand,
            seed: self.seed,
            config: self.config,
            started_unix: self.started_unix,
            duration_seconds: self.started.elapsed().as_secs_f64(),
            outputs,
        };
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

/// Row-at-a-time CSV (header from the first row, RFC 4180 quoting) or NDJSON.
pub struct TableWriter {
    path: PathBuf,
    inner: TableInner,
}

enum TableInner {
    Csv(csv::Writer<BufWriter<File>>),
    Json(BufWriter<File>),
}

impl TableWriter {
    fn create(path: &Path, format: Format) -> Result<Self, CliError> {
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        Ok(Self::wrap(path, format, f, true))
    }

    fn resume(path: &Path, format: Format, len: u64) -> Result<Self, CliError> {
        let f = fs::OpenOptions::new().write(true).open(path).map_err(|e| io_err(path, e))?;
        f.set_len(len).map_err(|e| io_err(path, e))?;
        let mut f = f;
        std::io::Seek::seek(&mut f, std::io::SeekFrom::End(0)).map_err(|e| io_err(path, e))?;
        Ok(Self::wrap(path, format, f, len == 0))
    }

    fn wrap(path: &Path, format: Format, f: File, header: bool) -> Self {
        let w = BufWriter::new(f);
        let inner = match format {
            Format::Csv => TableInner::Csv(csv::WriterBuilder::new().has_headers(header).from_writer(w)),
            Format::Ndjson => TableInner::Json(w),
        };
        Self { path: path.to_path_buf(), inner }
    }

    pub fn row<T: Serialize>(&mut self, row: &T) -> Result<(), CliError> {
        let path = &self.path;
        match &mut self.inner {
            TableInner::Csv(w) => w.serialize(row).map_err(|e| io_err(path, e)),
            TableInner::Json(w) => {
                serde_json::to_writer(&mut *w, row).map_err(|e| io_err(path, e))?;
                w.write_all(b"\n").map_err(|e| io_err(path, e))
            }
        }
    }

    /// Flushes and returns the file length.
    pub fn flush(&mut self) -> Result<u64, CliError> {
        let path = &self.path;
        match &mut self.inner {
            TableInner::Csv(w) => w.flush().map_err(|e| io_err(path, e))?,
            TableInner::Json(w) => w.flush().map_err(|e| io_err(path, e))?,
        }
        fs::metadata(path).map(|m| m.len()).map_err(|e| io_err(path, e))
    }

    pub fn finish(mut self) -> Result<u64, CliError> {
        self.flush()
    }
}

pub fn digest(path: &Path) -> Result<(String, u64), CliError> {
    let mut f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| io_err(path, e))?;
        if n == 0 {
            break;
        }
        total += n as u64;
        h.update(&buf[..n]);
    }
    Ok((format!("{:x}", h.finalize()), total))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = if dir.is_dir() { dir.join(MANIFEST) } else { dir.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub path: String,
    pub status: &'static str,
}

/// Recomputes every checksum listed in the manifest.
pub fn verify(dir: &Path) -> Result<Vec<VerifyRow>, CliError> {
    let manifest = read_manifest(dir)?;
    let base = if dir.is_dir() { dir.to_path_buf() } else { dir.parent().map(Path::to_path_buf).unwrap_or_default() };
    Ok(manifest
        .outputs
        .iter()
        .map(|o| {
            let status = match digest(&base.join(&o.path)) {
                Ok((sha, bytes)) if sha == o.sha256 && bytes == o.bytes => "ok",
                Ok(_) => "mismatch",
                Err(_) => "missing",
            };
            VerifyRow { path: o.path.clone(), status }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        t: f64,
        label: String,
    }

    #[test]
    fn manifest_roundtrip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::create(dir.path().to_path_buf(), Format::Csv, "demo", 1, serde_json::json!({})).unwrap();
        run.table("rows", &[Row { t: 0.5, label: "a,b".into() }]).unwrap();
        run.finish().unwrap();
        let text = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert_eq!(text, "t,label\n0.5,\"a,b\"\n");
        assert!(verify(dir.path()).unwrap().iter().all(|r| r.status == "ok"));
        fs::write(dir.path().join("rows.csv"), "t,label\n").unwrap();
        assert_eq!(verify(dir.path()).unwrap()[0].status, "mismatch");
    }

    #[test]
    fn resumed_stream_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::create(dir.path().to_path_buf(), Format::Ndjson, "demo", 1, Value::Null).unwrap();
        let mut w = run.stream("s", None).unwrap();
        w.row(&Row { t: 1.0, label: "x".into() }).unwrap();
        let mark = w.flush().unwrap();
        w.row(&Row { t: 2.0, label: "y".into() }).unwrap();
        w.finish().unwrap();
        let mut w = run.stream("s", Some(mark)).unwrap();
        w.row(&Row { t: 3.0, label: "z".into() }).unwrap();
        w.finish().unwrap();
        let text = fs::read_to_string(dir.path().join("s.ndjson")).unwrap();
        assert_eq!(text, "{\"t\":1.0,\"label\":\"x\"}\n{\"t\":3.0,\"label\":\"z\"}\n");
    }
}
