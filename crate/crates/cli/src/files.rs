//! Error classification, atomic outputs, hashed inputs and the run manifest.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use formulakit::curation::{FormulaRecord, IngestReport, Ingester};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Unreadable or invalid input data (exit 2).
    Data {
        file: String,
        line: Option<usize>,
        message: String,
    },
    /// Anything else, including failures writing outputs (exit 3).
    Internal(String),
    /// The reader of stdout went away, as with `| head`.
    StdoutClosed,
}

impl CliError {
    pub fn data(file: impl fmt::Display, line: Option<usize>, message: impl fmt::Display) -> Self {
        CliError::Data {
            file: file.to_string(),
            line,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Internal(_) => 3,
            CliError::StdoutClosed => 0,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Data {
                file,
                line: Some(line),
                message,
            } => write!(f, "error: {file}:{line}: {message}"),
            CliError::Data {
                file,
                line: None,
                message,
            } => write!(f, "error: {file}: {message}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::StdoutClosed => Ok(()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to compare two runs: the effective configuration and
/// the digest of every file read or written.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        // the worker count never changes outputs, so it stays out of the hash
        let mut hashed = config.clone();
        if let Some(map) = hashed.as_object_mut() {
            map.remove("workers");
        }
        let canonical = serde_json::to_string(&hashed).expect("value serializes");
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            config_sha256: hex::encode(Sha256::digest(canonical.as_bytes())),
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Output::create(Some(path))?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        writeln!(out, "{text}").map_err(|e| write_error(path, e))?;
        out.commit()?;
        Ok(())
    }
}

fn write_error(path: &Path, e: io::Error) -> CliError {
    if e.kind() == io::ErrorKind::BrokenPipe && path == Path::new("<stdout>") {
        return CliError::StdoutClosed;
    }
    CliError::Internal(format!("writing {}: {e}", path.display()))
}

/// Opens an input file and records its digest. The file is hashed in a
/// separate pass so the caller can still stream it.
pub fn open_input(path: &Path, manifest: &mut Manifest) -> Result<BufReader<File>> {
    let open = || File::open(path).map_err(|e| CliError::data(path.display(), None, e));
    let mut hasher = Sha256::new();
    let mut reader = BufReader::new(open()?);
    let mut buf = [0u8; 64 * 1024];
    let mut bytes = 0u64;
    loop {
        let n = reader
            .read(&mut buf)
            .map_err(|e| CliError::data(path.display(), None, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    manifest.inputs.push(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
        bytes,
    });
    Ok(BufReader::new(open()?))
}

pub fn read_input_to_string(path: &Path, manifest: &mut Manifest) -> Result<String> {
    let mut text = String::new();
    open_input(path, manifest)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::data(path.display(), None, e))?;
    Ok(text)
}

enum Sink {
    Stdout(io::StdoutLock<'static>),
    File {
        path: PathBuf,
        file: BufWriter<NamedTempFile>,
    },
}

/// Writes to stdout, or to a temporary file beside `path` that replaces
/// `path` only on [`Output::commit`].
pub struct Output {
    sink: Sink,
    hasher: Sha256,
    bytes: u64,
}

impl Output {
    pub fn create(path: Option<&Path>) -> Result<Self> {
        let sink = match path {
            None => Sink::Stdout(io::stdout().lock()),
            Some(p) if p == Path::new("-") => Sink::Stdout(io::stdout().lock()),
            Some(p) => {
                let dir = match p.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d,
                    _ => Path::new("."),
                };
                let tmp = NamedTempFile::new_in(dir).map_err(|e| write_error(p, e))?;
                Sink::File {
                    path: p.to_owned(),
                    file: BufWriter::new(tmp),
                }
            }
        };
        Ok(Self {
            sink,
            hasher: Sha256::new(),
            bytes: 0,
        })
    }

    fn path(&self) -> &Path {
        match &self.sink {
            Sink::Stdout(_) => Path::new("<stdout>"),
            Sink::File { path, .. } => path,
        }
    }

    pub fn json_line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let mut line = serde_json::to_vec(value).map_err(|e| CliError::Internal(e.to_string()))?;
        line.push(b'\n');
        self.write_all(&line).map_err(|e| write_error(self.path(), e))
    }

    pub fn json_pretty<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push(b'\n');
        self.write_all(&text).map_err(|e| write_error(self.path(), e))
    }

    pub fn text_line(&mut self, line: &str) -> Result<()> {
        writeln!(self, "{line}").map_err(|e| write_error(self.path(), e))
    }

    /// Flushes and, for files, renames into place. Returns the digest of
    /// file artifacts.
    pub fn commit(self) -> Result<Option<FileDigest>> {
        let sha256 = hex::encode(self.hasher.finalize());
        match self.sink {
            Sink::Stdout(mut out) => {
                out.flush().map_err(|e| write_error(Path::new("<stdout>"), e))?;
                Ok(None)
            }
            Sink::File { path, file } => {
                let tmp = file.into_inner().map_err(|e| write_error(&path, e.into_error()))?;
                tmp.as_file().sync_all().map_err(|e| write_error(&path, e))?;
                tmp.persist(&path).map_err(|e| write_error(&path, e.error))?;
                Ok(Some(FileDigest {
                    path: path.display().to_string(),
                    sha256,
                    bytes: self.bytes,
                }))
            }
        }
    }

    pub fn commit_into(self, manifest: &mut Manifest) -> Result<()> {
        if let Some(d) = self.commit()? {
            manifest.artifacts.push(d);
        }
        Ok(())
    }
}

impl Write for Output {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = match &mut self.sink {
            Sink::Stdout(out) => out.write(buf)?,
            Sink::File { file, .. } => file.write(buf)?,
        };
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        match &mut self.sink {
            Sink::Stdout(out) => out.flush(),
            Sink::File { file, .. } => file.flush(),
        }
    }
}

/// Reads a JSONL corpus in fixed-size chunks, skipping malformed records.
pub struct CorpusReader<R> {
    name: String,
    lines: io::Lines<R>,
    ingester: Ingester,
}

pub const CHUNK: usize = 4096;

impl<R: BufRead> CorpusReader<R> {
    pub fn new(name: impl fmt::Display, reader: R) -> Self {
        Self {
            name: name.to_string(),
            lines: reader.lines(),
            ingester: Ingester::new(),
        }
    }

    /// Up to `n` records; empty at end of input.
    pub fn next_chunk(&mut self, n: usize) -> Result<Vec<FormulaRecord>> {
        let mut out = Vec::with_capacity(n.min(CHUNK));
        while out.len() < n {
            let Some(line) = self.lines.next() else { break };
            let line = line.map_err(|e| CliError::data(&self.name, Some(self.ingester.report().lines + 1), e))?;
            if let Some(r) = self.ingester.push_line(&line) {
                out.push(r);
            }
        }
        Ok(out)
    }

    pub fn finish(self) -> IngestReport {
        let report = self.ingester.finish();
        if report.skipped_total() > 0 {
            eprintln!(
                "{}: {} record(s) read, {} skipped",
                self.name,
                report.accepted,
                report.skipped_total()
            );
            for (line, reason) in &report.first_skipped {
                eprintln!("  {}:{line}: {reason}", self.name);
            }
        }
        report
    }
}

/// Runs `f` over every chunk of the corpus at `path`, passing the stream
/// position of the chunk's first record.
pub fn for_each_chunk(
    path: &Path,
    manifest: &mut Manifest,
    mut f: impl FnMut(u64, Vec<FormulaRecord>) -> Result<()>,
) -> Result<IngestReport> {
    let mut reader = CorpusReader::new(path.display(), open_input(path, manifest)?);
    let mut ordinal = 0u64;
    loop {
        let chunk = reader.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let n = chunk.len() as u64;
        f(ordinal, chunk)?;
        ordinal += n;
    }
    Ok(reader.finish())
}

/// Parses a JSONL file of `T`, reporting the first bad line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, manifest: &mut Manifest) -> Result<Vec<T>> {
    let reader = open_input(path, manifest)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::data(path.display(), Some(i + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::data(path.display(), Some(i + 1), e))?);
    }
    Ok(out)
}
