//! Exclusive output directories with staged writes and a run manifest.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{Failure, ResultExt};

pub const LOCK_FILE: &str = ".cascade.lock";
pub const STAGING_DIR: &str = ".partial";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Hex SHA-256 of a file's contents.
pub fn file_digest(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    io::copy(&mut BufReader::new(File::open(path)?), &mut hasher)?;
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Digests of input files.
pub fn input_digests(files: &[PathBuf]) -> Result<Vec<FileDigest>, Failure> {
    files
        .iter()
        .map(|f| {
            let sha256 = file_digest(f)
                .with_context(|| format!("{}: cannot read", f.display()))
                .input()?;
            Ok(FileDigest {
                path: f.display().to_string(),
                sha256,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
    pub knobs: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub summary: serde_json::Value,
    pub outputs: Vec<FileDigest>,
}

/// An output directory owned by one run. Files are written to a staging
/// directory and moved into place by [`OutputDir::commit`]; on drop without
/// commit the staged files are removed. The lock file is always removed.
pub struct OutputDir {
    dir: PathBuf,
    staging: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub fn acquire(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .with_context(|| format!("{}: cannot create output directory", dir.display()))
            .output()?;
        let lock = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(Failure::locked(&lock));
            }
            Err(e) => {
                return Err(e)
                    .with_context(|| format!("{}: cannot create lock file", lock.display()))
                    .output()
            }
        }
        let out = Self {
            dir: dir.to_owned(),
            staging: dir.join(STAGING_DIR),
            lock,
        };
        if out.staging.exists() {
            fs::remove_dir_all(&out.staging)
                .context("cannot clear stale staging directory")
                .output()?;
        }
        fs::create_dir(&out.staging)
            .context("cannot create staging directory")
            .output()?;
        Ok(out)
    }

    /// Staging directory; outputs are written here.
    pub fn staging(&self) -> &Path {
        &self.staging
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.staging.join(name);
        File::create(&path)
            .map(|f| BufWriter::with_capacity(1 << 20, f))
            .with_context(|| format!("{}: cannot create", path.display()))
            .output()
    }

    /// Writes with `f` into a staged file, then flushes it.
    pub fn write<F>(&self, name: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> cascade_structure::Result<()>,
    {
        let mut w = self.create(name)?;
        f(&mut w)
            .and_then(|()| w.flush().map_err(Into::into))
            .with_context(|| format!("{name}: write failed"))
            .output()
    }

    /// Moves staged files into the output directory and writes the manifest
    /// last, with digests of every output.
    pub fn commit(self, mut manifest: Manifest) -> Result<(), Failure> {
        let mut names: Vec<String> = fs::read_dir(&self.staging)
            .context("cannot list staging directory")
            .output()?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in &names {
            let sha256 = file_digest(&self.staging.join(name))
                .with_context(|| format!("{name}: cannot read back"))
                .output()?;
            manifest.outputs.push(FileDigest {
                path: name.clone(),
                sha256,
            });
        }
        self.write(MANIFEST_FILE, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)?;
            Ok(())
        })?;
        names.push(MANIFEST_FILE.to_owned());
        for name in &names {
            fs::rename(self.staging.join(name), self.dir.join(name))
                .with_context(|| format!("{name}: cannot move into place"))
                .output()?;
        }
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.staging);
        let _ = fs::remove_file(&self.lock);
    }
}
