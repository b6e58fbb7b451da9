//! Content-addressed artifact directory.
//!
//! A blob is stored as `<dir>/<sha256 hex>.<ext>` and referred to as
//! `sha256:<hex>.<ext>`. Writes go through a temporary file and a rename,
//! so a reader never sees a partial blob.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::fault::FaultInjector;

const PREFIX: &str = "sha256:";
const TMP_SUFFIX: &str = ".tmp";

#[derive(Debug, Clone)]
pub struct BlobStore {
    dir: PathBuf,
    faults: Arc<FaultInjector>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Splits a reference into (hex digest, extension) if well formed.
fn parse_ref(reference: &str) -> Option<(&str, &str)> {
    let rest = reference.strip_prefix(PREFIX)?;
    let (hash, ext) = rest.split_once('.')?;
    let hash_ok = hash.len() == 64 && hash.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase());
    let ext_ok = !ext.is_empty() && ext.len() <= 8 && ext.bytes().all(|b| b.is_ascii_alphanumeric());
    (hash_ok && ext_ok).then_some((hash, ext))
}

impl BlobStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<BlobStore> {
        BlobStore::with_faults(dir, Arc::new(FaultInjector::default()))
    }

    pub fn with_faults(dir: impl Into<PathBuf>, faults: Arc<FaultInjector>) -> io::Result<BlobStore> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(BlobStore { dir, faults })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn reference(bytes: &[u8], ext: &str) -> String {
        format!("{PREFIX}{}.{ext}", sha256_hex(bytes))
    }

    /// File path for a well-formed reference.
    pub fn path(&self, reference: &str) -> Option<PathBuf> {
        let (hash, ext) = parse_ref(reference)?;
        Some(self.dir.join(format!("{hash}.{ext}")))
    }

    pub fn exists(&self, reference: &str) -> bool {
        self.path(reference).is_some_and(|p| p.is_file())
    }

    /// Stores `bytes` and returns the reference plus whether the blob was
    /// new. Storing the same bytes twice is a no-op.
    pub fn put(&self, bytes: &[u8], ext: &str) -> io::Result<(String, bool)> {
        let reference = BlobStore::reference(bytes, ext);
        let path = self
            .path(&reference)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("bad extension {ext:?}")))?;
        if path.is_file() {
            return Ok((reference, false));
        }
        let tmp = path.with_extension(format!("{ext}{TMP_SUFFIX}"));
        let mut file = fs::File::create(&tmp)?;
        if let Err(e) = self.faults.check("blob write") {
            // Leave a torn temporary behind, as a crash mid-write would.
            file.write_all(&bytes[..bytes.len() / 2])?;
            return Err(e);
        }
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok((reference, true))
    }

    pub fn get(&self, reference: &str) -> io::Result<Vec<u8>> {
        let path = self
            .path(reference)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("bad blob reference {reference:?}")))?;
        fs::read(path)
    }

    pub fn remove(&self, reference: &str) -> io::Result<()> {
        match self.path(reference) {
            Some(path) => fs::remove_file(path),
            None => Ok(()),
        }
    }

    /// References of every complete blob, sorted.
    pub fn list(&self) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            let reference = format!("{PREFIX}{name}");
            if parse_ref(&reference).is_some() {
                out.push(reference);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Leftover temporaries from interrupted writes.
    pub fn temporaries(&self) -> io::Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.to_string_lossy().ends_with(TMP_SUFFIX) {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    }
}
