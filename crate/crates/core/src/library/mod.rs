//! The music library: sessions with their plans, sketches, renders and
//! reports, kept append-only so earlier attempts stay comparable.
//!
//! Entries live in a SQLite file; MIDI and audio live in a
//! content-addressed blob directory beside it.
//!
//! ```text
//! <root>/library.sqlite3
//! <root>/blobs/<sha256>.<ext>
//! ```

mod diff;
mod export;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OpenFlags, OptionalExtension};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blobs::BlobStore;
use crate::fault::FaultInjector;
use crate::midi::emit_midi;
use crate::model::{AttributeSet, RenderResult, SessionEntry, SymbolicPrompt, Violation};

pub use diff::{AlignmentDelta, EntrySummary, PlanDelta, ProvenanceDelta, SessionDiff};

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {id} conflicts with stored history: {reason}")]
    HistoryConflict { id: String, reason: String },
    #[error("invalid session: {0}")]
    InvalidEntry(String),
    #[error("invalid plan: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPlan(Vec<Violation>),
}

impl From<rusqlite::Error> for LibraryError {
    fn from(e: rusqlite::Error) -> Self {
        LibraryError::StorageFailure(e.to_string())
    }
}

impl From<std::io::Error> for LibraryError {
    fn from(e: std::io::Error) -> Self {
        LibraryError::StorageFailure(e.to_string())
    }
}

impl From<serde_json::Error> for LibraryError {
    fn from(e: serde_json::Error) -> Self {
        LibraryError::StorageFailure(format!("stored JSON is unreadable: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub intent_text: String,
    pub created_at: DateTime<Utc>,
    /// From the latest render; `None` before the first render.
    pub overall_match: Option<bool>,
    #[serde(default)]
    pub parent_session: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ListFilter {
    /// Restrict to this session and its revisions.
    #[serde(default)]
    pub lineage_root: Option<String>,
    #[serde(default)]
    pub since: Option<DateTime<Utc>>,
    #[serde(default)]
    pub until: Option<DateTime<Utc>>,
}

/// Outcome of a consistency scan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    /// Blobs no session refers to.
    pub unreferenced: Vec<String>,
    /// References whose blob is missing.
    pub missing: Vec<String>,
    /// Leftovers from interrupted blob writes.
    pub temporaries: Vec<PathBuf>,
}

impl RepairReport {
    pub fn is_clean(&self) -> bool {
        self.unreferenced.is_empty() && self.missing.is_empty() && self.temporaries.is_empty()
    }
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS sessions (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id TEXT NOT NULL UNIQUE,
    created_at TEXT NOT NULL,
    intent_text TEXT NOT NULL,
    plan_json TEXT NOT NULL,
    parent_session TEXT REFERENCES sessions(session_id)
);
CREATE TABLE IF NOT EXISTS sketches (
    session_id TEXT NOT NULL REFERENCES sessions(session_id),
    idx INTEGER NOT NULL,
    prompt_json TEXT NOT NULL,
    midi_ref TEXT NOT NULL,
    PRIMARY KEY (session_id, idx)
);
CREATE TABLE IF NOT EXISTS results (
    session_id TEXT NOT NULL REFERENCES sessions(session_id),
    idx INTEGER NOT NULL,
    result_json TEXT NOT NULL,
    output_ref TEXT NOT NULL,
    PRIMARY KEY (session_id, idx)
);
";

pub const DATABASE_FILE: &str = "library.sqlite3";
pub const BLOB_DIR: &str = "blobs";

#[derive(Debug)]
pub struct Library {
    db_path: PathBuf,
    blobs: BlobStore,
    faults: Arc<FaultInjector>,
    /// The single writer connection; readers open their own.
    writer: Mutex<Connection>,
}

fn timestamp(t: &DateTime<Utc>) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .expect("timestamps serialize as strings")
}

fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, LibraryError> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(LibraryError::from)
}

impl Library {
    pub fn open(root: impl AsRef<Path>) -> Result<Library, LibraryError> {
        Library::open_with_faults(root, Arc::new(FaultInjector::default()))
    }

    /// Opens a library whose writes pass through `faults`.
    pub fn open_with_faults(root: impl AsRef<Path>, faults: Arc<FaultInjector>) -> Result<Library, LibraryError> {
        let root = root.as_ref();
        std::fs::create_dir_all(root)?;
        let blobs = BlobStore::with_faults(root.join(BLOB_DIR), faults.clone())?;
        let db_path = root.join(DATABASE_FILE);
        let conn = Connection::open(&db_path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(SCHEMA)?;
        Ok(Library {
            db_path,
            blobs,
            faults,
            writer: Mutex::new(conn),
        })
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn faults(&self) -> &FaultInjector {
        &self.faults
    }

    fn reader(&self) -> Result<Connection, LibraryError> {
        let conn = Connection::open_with_flags(
            &self.db_path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        Ok(conn)
    }

    /// Persists `entry`. Saving an id again may only append sketches and
    /// results; anything else already stored must be unchanged. On error
    /// nothing from this call is visible.
    pub fn save_session(&self, entry: &SessionEntry) -> Result<String, LibraryError> {
        validate_entry(entry)?;
        for result in &entry.results {
            if !self.blobs.exists(&result.output_ref) {
                return Err(LibraryError::InvalidEntry(format!(
                    "render output {} is not in the blob store",
                    result.output_ref
                )));
            }
        }

        let mut conn = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let mut created = Vec::new();
        let outcome = self.write_entry(&mut conn, entry, &mut created);
        if outcome.is_err() {
            // Blobs written by this call are unreferenced now.
            for reference in created {
                let _ = self.blobs.remove(&reference);
            }
        }
        outcome.map(|_| entry.session_id.clone())
    }

    fn write_entry(
        &self,
        conn: &mut Connection,
        entry: &SessionEntry,
        created: &mut Vec<String>,
    ) -> Result<(), LibraryError> {
        let tx = conn.transaction()?;
        let plan_json = serde_json::to_string(&entry.plan)?;
        let stored: Option<(String, String, String, Option<String>)> = tx
            .query_row(
                "SELECT created_at, intent_text, plan_json, parent_session FROM sessions WHERE session_id = ?1",
                [&entry.session_id],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?;
        let conflict = |reason: &str| LibraryError::HistoryConflict {
            id: entry.session_id.clone(),
            reason: reason.to_string(),
        };
        match &stored {
            Some((created_at, intent, plan, parent)) => {
                if parse_timestamp(created_at)? != entry.created_at {
                    return Err(conflict("created_at differs"));
                }
                if *intent != entry.intent_text {
                    return Err(conflict("intent text differs"));
                }
                let stored_plan: AttributeSet = serde_json::from_str(plan)?;
                if stored_plan != entry.plan {
                    return Err(conflict("plan differs; save the edit as a revision instead"));
                }
                if *parent != entry.parent_session {
                    return Err(conflict("parent session differs"));
                }
            }
            None => {
                if let Some(parent) = &entry.parent_session {
                    let known: bool = tx.query_row(
                        "SELECT EXISTS(SELECT 1 FROM sessions WHERE session_id = ?1)",
                        [parent],
                        |r| r.get(0),
                    )?;
                    // A new entry can only point at an existing one, so
                    // lineage stays a forest.
                    if !known {
                        return Err(LibraryError::UnknownSession(parent.clone()));
                    }
                }
                self.faults.check("session insert")?;
                tx.execute(
                    "INSERT INTO sessions (session_id, created_at, intent_text, plan_json, parent_session)
                     VALUES (?1, ?2, ?3, ?4, ?5)",
                    params![
                        entry.session_id,
                        timestamp(&entry.created_at),
                        entry.intent_text,
                        plan_json,
                        entry.parent_session
                    ],
                )?;
            }
        }

        let stored_sketches: Vec<String> = query_strings(
            &tx,
            "SELECT prompt_json FROM sketches WHERE session_id = ?1 ORDER BY idx",
            &entry.session_id,
        )?;
        if stored_sketches.len() > entry.sketches.len() {
            return Err(conflict("sketches were removed"));
        }
        for (i, (old, new)) in stored_sketches.iter().zip(&entry.sketches).enumerate() {
            if serde_json::from_str::<SymbolicPrompt>(old)? != *new {
                return Err(conflict(&format!("sketch {i} was rewritten")));
            }
        }
        for (i, sketch) in entry.sketches.iter().enumerate().skip(stored_sketches.len()) {
            let (midi_ref, is_new) = self.blobs.put(&emit_midi(sketch), "mid")?;
            if is_new {
                created.push(midi_ref.clone());
            }
            self.faults.check("sketch insert")?;
            tx.execute(
                "INSERT INTO sketches (session_id, idx, prompt_json, midi_ref) VALUES (?1, ?2, ?3, ?4)",
                params![entry.session_id, i as i64, serde_json::to_string(sketch)?, midi_ref],
            )?;
        }

        let stored_results: Vec<String> = query_strings(
            &tx,
            "SELECT result_json FROM results WHERE session_id = ?1 ORDER BY idx",
            &entry.session_id,
        )?;
        if stored_results.len() > entry.results.len() {
            return Err(conflict("results were removed"));
        }
        for (i, (old, new)) in stored_results.iter().zip(&entry.results).enumerate() {
            if serde_json::from_str::<RenderResult>(old)? != *new {
                return Err(conflict(&format!("result {i} was rewritten")));
            }
        }
        for (i, result) in entry.results.iter().enumerate().skip(stored_results.len()) {
            self.faults.check("result insert")?;
            tx.execute(
                "INSERT INTO results (session_id, idx, result_json, output_ref) VALUES (?1, ?2, ?3, ?4)",
                params![entry.session_id, i as i64, serde_json::to_string(result)?, result.output_ref],
            )?;
        }
        self.faults.check("commit")?;
        tx.commit()?;
        Ok(())
    }

    pub fn load_session(&self, session_id: &str) -> Result<SessionEntry, LibraryError> {
        let conn = self.reader()?;
        load(&conn, session_id)
    }

    pub fn contains(&self, session_id: &str) -> Result<bool, LibraryError> {
        let conn = self.reader()?;
        Ok(conn.query_row(
            "SELECT EXISTS(SELECT 1 FROM sessions WHERE session_id = ?1)",
            [session_id],
            |r| r.get(0),
        )?)
    }

    /// Newest first. A lineage filter returns the root and every revision
    /// below it.
    pub fn list_sessions(&self, filter: &ListFilter) -> Result<Vec<SessionSummary>, LibraryError> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare(
            "SELECT s.session_id, s.intent_text, s.created_at, s.parent_session,
                    (SELECT result_json FROM results r WHERE r.session_id = s.session_id ORDER BY idx DESC LIMIT 1)
             FROM sessions s ORDER BY s.seq",
        )?;
        let rows = stmt
            .query_map([], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, Option<String>>(3)?,
                    r.get::<_, Option<String>>(4)?,
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?;

        let mut summaries = Vec::with_capacity(rows.len());
        for (session_id, intent_text, created_at, parent_session, latest) in rows {
            let overall_match = match latest {
                Some(json) => Some(serde_json::from_str::<RenderResult>(&json)?.report.overall_match),
                None => None,
            };
            summaries.push(SessionSummary {
                session_id,
                intent_text,
                created_at: parse_timestamp(&created_at)?,
                overall_match,
                parent_session,
            });
        }

        if let Some(root) = &filter.lineage_root {
            if !summaries.iter().any(|s| &s.session_id == root) {
                return Err(LibraryError::UnknownSession(root.clone()));
            }
            let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for s in &summaries {
                if let Some(p) = &s.parent_session {
                    children.entry(p.as_str()).or_default().push(&s.session_id);
                }
            }
            let mut keep: BTreeSet<String> = BTreeSet::new();
            let mut stack = vec![root.as_str()];
            while let Some(id) = stack.pop() {
                if keep.insert(id.to_string()) {
                    stack.extend(children.get(id).into_iter().flatten());
                }
            }
            summaries.retain(|s| keep.contains(&s.session_id));
        }
        summaries.retain(|s| {
            filter.since.is_none_or(|t| s.created_at >= t) && filter.until.is_none_or(|t| s.created_at <= t)
        });
        // Stable sort keeps later saves first among equal timestamps.
        summaries.reverse();
        summaries.sort_by_key(|s| std::cmp::Reverse(s.created_at));
        Ok(summaries)
    }

    pub fn diff_sessions(&self, a: &str, b: &str) -> Result<SessionDiff, LibraryError> {
        let conn = self.reader()?;
        Ok(SessionDiff::between(&load(&conn, a)?, &load(&conn, b)?))
    }

    /// MIDI file of a stored sketch.
    pub fn sketch_midi(&self, session_id: &str, index: usize) -> Result<Vec<u8>, LibraryError> {
        let conn = self.reader()?;
        let reference: String = conn
            .query_row(
                "SELECT midi_ref FROM sketches WHERE session_id = ?1 AND idx = ?2",
                params![session_id, index as i64],
                |r| r.get(0),
            )
            .optional()?
            .ok_or_else(|| LibraryError::UnknownSession(format!("{session_id} sketch {index}")))?;
        Ok(self.blobs.get(&reference)?)
    }

    /// Zip archive of one session for sharing outside the app.
    pub fn export_session(&self, session_id: &str) -> Result<Vec<u8>, LibraryError> {
        let entry = self.load_session(session_id)?;
        export::session_zip(self, &entry)
    }

    fn referenced_blobs(&self) -> Result<BTreeSet<String>, LibraryError> {
        let conn = self.reader()?;
        let mut refs = BTreeSet::new();
        for sql in ["SELECT midi_ref FROM sketches", "SELECT output_ref FROM results"] {
            let mut stmt = conn.prepare(sql)?;
            for r in stmt.query_map([], |r| r.get::<_, String>(0))? {
                refs.insert(r?);
            }
        }
        Ok(refs)
    }

    /// Compares blob references with the blob directory. Renders that were
    /// never saved into a session show up as unreferenced.
    pub fn repair_scan(&self) -> Result<RepairReport, LibraryError> {
        let referenced = self.referenced_blobs()?;
        let present: BTreeSet<String> = self.blobs.list()?.into_iter().collect();
        Ok(RepairReport {
            unreferenced: present.difference(&referenced).cloned().collect(),
            missing: referenced.difference(&present).cloned().collect(),
            temporaries: self.blobs.temporaries()?,
        })
    }

    /// Deletes unreferenced blobs and temporaries; returns what was found.
    pub fn repair(&self) -> Result<RepairReport, LibraryError> {
        let _writer = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let report = self.repair_scan()?;
        for reference in &report.unreferenced {
            self.blobs.remove(reference)?;
        }
        for path in &report.temporaries {
            std::fs::remove_file(path)?;
        }
        Ok(report)
    }
}

fn query_strings(conn: &Connection, sql: &str, id: &str) -> Result<Vec<String>, LibraryError> {
    let mut stmt = conn.prepare(sql)?;
    let rows = stmt.query_map([id], |r| r.get::<_, String>(0))?;
    Ok(rows.collect::<Result<_, _>>()?)
}

fn load(conn: &Connection, session_id: &str) -> Result<SessionEntry, LibraryError> {
    let row: Option<(String, String, String, Option<String>)> = conn
        .query_row(
            "SELECT created_at, intent_text, plan_json, parent_session FROM sessions WHERE session_id = ?1",
            [session_id],
            |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
        )
        .optional()?;
    let (created_at, intent_text, plan_json, parent_session) =
        row.ok_or_else(|| LibraryError::UnknownSession(session_id.to_string()))?;
    let sketches = query_strings(
        conn,
        "SELECT prompt_json FROM sketches WHERE session_id = ?1 ORDER BY idx",
        session_id,
    )?
    .iter()
    .map(|s| serde_json::from_str(s))
    .collect::<Result<_, _>>()?;
    let results = query_strings(
        conn,
        "SELECT result_json FROM results WHERE session_id = ?1 ORDER BY idx",
        session_id,
    )?
    .iter()
    .map(|s| serde_json::from_str(s))
    .collect::<Result<_, _>>()?;
    Ok(SessionEntry {
        session_id: session_id.to_string(),
        created_at: parse_timestamp(&created_at)?,
        intent_text,
        plan: serde_json::from_str(&plan_json)?,
        sketches,
        results,
        parent_session,
    })
}

fn validate_entry(entry: &SessionEntry) -> Result<(), LibraryError> {
    if entry.session_id.trim().is_empty() || entry.session_id.len() > 128 {
        return Err(LibraryError::InvalidEntry("session id must be 1 to 128 characters".into()));
    }
    if entry.parent_session.as_deref() == Some(entry.session_id.as_str()) {
        return Err(LibraryError::InvalidEntry("a session cannot be its own parent".into()));
    }
    let violations = entry.plan.validate();
    if !violations.is_empty() {
        return Err(LibraryError::InvalidPlan(violations));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
