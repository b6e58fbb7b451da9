//! On-disk corpus layout:
//!
//! ```text
//! <dir>/manifest.json          {"version": 1, "segments": [{"id": ..., "sha256": ...}]}
//! <dir>/segments/<id>.mid      Standard MIDI File
//! <dir>/segments/<id>.json     flat tag object, e.g. {"key": "C major", "tempo": 120}
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_record, SegmentDatabase, StoreError};
use crate::midi::emit_midi;
use crate::model::{SegmentRecord, Tags};

pub const MANIFEST_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const SEGMENTS: &str = "segments";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub segments: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn corpus_error(path: &Path, what: impl std::fmt::Display) -> StoreError {
    StoreError::Corpus(format!("{}: {what}", path.display()))
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or_default()
    ));
    let mut file = fs::File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn segment_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    let segments = dir.join(SEGMENTS);
    (segments.join(format!("{id}.mid")), segments.join(format!("{id}.json")))
}

fn read_tags(path: &Path) -> Result<Tags, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| corpus_error(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| corpus_error(path, e))?;
    let map = value
        .as_object()
        .ok_or_else(|| corpus_error(path, "tags must be a JSON object"))?;
    Ok(Tags::from_json(map)?)
}

fn read_segment(dir: &Path, id: &str, expected_sha: Option<&str>) -> Result<SegmentRecord, StoreError> {
    let (mid, json) = segment_paths(dir, id);
    let bytes = fs::read(&mid).map_err(|e| corpus_error(&mid, e))?;
    if let Some(expected) = expected_sha {
        let actual = sha256_hex(&bytes);
        if actual != expected {
            return Err(corpus_error(&mid, format!("sha256 {actual} does not match manifest {expected}")));
        }
    }
    let tags = read_tags(&json)?;
    build_record(id, &bytes, tags)
}

/// Reads every segment of a corpus directory. With a manifest, its order and
/// checksums are authoritative; without one, every `segments/*.mid` with a
/// sidecar is read in file-name order.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<SegmentRecord>, StoreError> {
    let manifest_path = dir.join(MANIFEST);
    if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| corpus_error(&manifest_path, e))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(corpus_error(
                &manifest_path,
                format!("unsupported manifest version {}", manifest.version),
            ));
        }
        return manifest
            .segments
            .iter()
            .map(|entry| read_segment(dir, &entry.id, Some(&entry.sha256)))
            .collect();
    }

    let segments = dir.join(SEGMENTS);
    let mut ids: Vec<String> = fs::read_dir(&segments)
        .map_err(|e| corpus_error(&segments, e))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            (path.extension()? == "mid").then(|| path.file_stem()?.to_str().map(str::to_string))?
        })
        .collect();
    ids.sort();
    ids.iter().map(|id| read_segment(dir, id, None)).collect()
}

pub fn load_corpus(dir: &Path) -> Result<SegmentDatabase, StoreError> {
    SegmentDatabase::from_records(read_corpus_dir(dir)?)
}

/// Writes every record plus a fresh manifest. Existing segment files for
/// the same ids are replaced; the manifest is written last.
pub fn save_corpus(db: &SegmentDatabase, dir: &Path) -> Result<Manifest, StoreError> {
    fs::create_dir_all(dir.join(SEGMENTS))?;
    let mut manifest = Manifest {
        version: MANIFEST_VERSION,
        segments: Vec::with_capacity(db.len()),
    };
    for record in db.records() {
        let (mid, json) = segment_paths(dir, &record.segment_id);
        let bytes = emit_midi(&record.content);
        write_atomic(&mid, &bytes)?;
        let tags = serde_json::to_vec_pretty(&record.tags.to_json()).expect("tags serialize");
        write_atomic(&json, &tags)?;
        manifest.segments.push(ManifestEntry {
            id: record.segment_id.clone(),
            sha256: sha256_hex(&bytes),
        });
    }
    let text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join(MANIFEST), &text)?;
    Ok(manifest)
}
