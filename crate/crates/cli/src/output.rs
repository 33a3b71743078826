//! Single writer for everything a run puts on disk, and the run manifest.

use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::binfmt::{self, Array};
use crate::config::{hex, Format};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    /// Absent for the manifest itself.
    pub sha256: Option<String>,
    /// Written by this run, or found in the directory beforehand.
    pub origin: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskStatus {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub code_version: &'static str,
    pub subcommand: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// "ok", "failed", or "partial" when some outputs were written before a failure.
    pub status: String,
    pub tasks: Vec<TaskStatus>,
    pub files: Vec<FileEntry>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct Output {
    dir: PathBuf,
    formats: Vec<Format>,
    files: Vec<FileEntry>,
    tasks: Vec<TaskStatus>,
    started: u64,
}

impl Output {
    pub fn new(dir: &Path, formats: &[Format]) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf(), formats: formats.to_vec(), files: Vec::new(), tasks: Vec::new(), started: now() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn written(&self) -> usize {
        self.files.len()
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: Some(hex(&Sha256::digest(bytes))),
            origin: "run",
        });
        Ok(())
    }

    /// CSV with a fixed header; values are written in shortest round-trip form.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write_bytes(name, s.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut v = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        v.push(b'\n');
        self.write_bytes(name, &v)
    }

    pub fn array(&mut self, name: &str, a: &Array) -> io::Result<()> {
        if !self.wants(Format::Bin) {
            return Ok(());
        }
        self.write_bytes(name, &binfmt::encode(a)?)
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> io::Result<()> {
        if !self.wants(Format::Svg) {
            return Ok(());
        }
        self.write_bytes(name, svg.as_bytes())
    }

    pub fn task(&mut self, name: &str, ok: bool, message: Option<String>) {
        self.tasks.push(TaskStatus { name: name.to_string(), status: if ok { "ok" } else { "failed" }.into(), message });
    }

    /// Writes the manifest, listing every file in the directory.
    pub fn finish(mut self, subcommand: &str, config_hash: &str, status: &str) -> io::Result<RunManifest> {
        let mut extra = Vec::new();
        for e in std::fs::read_dir(&self.dir)? {
            let e = e?;
            let name = e.file_name().to_string_lossy().into_owned();
            if e.file_type()?.is_file() && name != MANIFEST && !self.files.iter().any(|f| f.path == name) {
                let bytes = std::fs::read(e.path())?;
                extra.push(FileEntry {
                    path: name,
                    bytes: bytes.len() as u64,
                    sha256: Some(hex(&Sha256::digest(&bytes))),
                    origin: "preexisting",
                });
            }
        }
        extra.sort_by(|a, b| a.path.cmp(&b.path));
        self.files.extend(extra);
        self.files.push(FileEntry { path: MANIFEST.into(), bytes: 0, sha256: None, origin: "run" });
        let m = RunManifest {
            tool: "waveinv",
            code_version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config_hash: config_hash.to_string(),
            started_unix: self.started,
            finished_unix: now(),
            status: status.to_string(),
            tasks: self.tasks,
            files: self.files,
        };
        let mut v = serde_json::to_vec_pretty(&m).map_err(io::Error::other)?;
        v.push(b'\n');
        std::fs::write(self.dir.join(MANIFEST), v)?;
        Ok(m)
    }
}
