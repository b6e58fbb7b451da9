//! Tagged segment database with weighted tag-match retrieval.

mod corpus;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::midi::{read_smf, MidiError, MidiParseError};
use crate::model::{
    is_valid_segment_id, AttributeId, AttributeSet, AttributeValue, Provenance, SegmentRecord, TagError, Tags,
};
use crate::refine::key::detect_key;

pub use corpus::{load_corpus, read_corpus_dir, save_corpus, Manifest, ManifestEntry, MANIFEST_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    MidiParse(#[from] MidiParseError),
    #[error("MIDI content does not form a legal prompt: {0}")]
    IllegalContent(String),
    #[error("illegal tag: {0}")]
    IllegalTag(#[from] TagError),
    #[error("segment id {0:?} is not a valid file stem")]
    InvalidId(String),
    #[error("segment {0} already exists")]
    DuplicateSegment(String),
    #[error("database has no segments")]
    EmptyDatabase,
    #[error("corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<MidiError> for StoreError {
    fn from(e: MidiError) -> Self {
        match e {
            MidiError::Parse(p) => StoreError::MidiParse(p),
            MidiError::Prompt(p) => StoreError::IllegalContent(p.to_string()),
        }
    }
}

/// attribute id → match key → segment ids.
pub type Index = BTreeMap<AttributeId, BTreeMap<String, BTreeSet<String>>>;

#[derive(Debug, Clone, Default)]
pub struct SegmentDatabase {
    records: BTreeMap<String, SegmentRecord>,
    index: Index,
}

/// Σ w·[record tag equals plan value] over the plan's attributes, summed in
/// plan order.
pub fn score(plan: &AttributeSet, record: &SegmentRecord) -> f64 {
    plan.attributes
        .iter()
        .map(|a| match record.tags.get(a.id()) {
            Some(tag) if tag.matches(&a.value) => a.weight,
            _ => 0.0,
        })
        .sum()
}

fn build_index<'a>(records: impl Iterator<Item = &'a SegmentRecord>) -> Index {
    let mut index = Index::new();
    for record in records {
        add_to_index(&mut index, record);
    }
    index
}

fn add_to_index(index: &mut Index, record: &SegmentRecord) {
    for tag in record.tags.iter() {
        index
            .entry(tag.id())
            .or_default()
            .entry(tag.match_key())
            .or_default()
            .insert(record.segment_id.clone());
    }
}

impl SegmentDatabase {
    pub fn new() -> SegmentDatabase {
        SegmentDatabase::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = SegmentRecord>) -> Result<SegmentDatabase, StoreError> {
        let mut db = SegmentDatabase::new();
        for record in records {
            db.insert(record)?;
        }
        Ok(db)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, segment_id: &str) -> Option<&SegmentRecord> {
        self.records.get(segment_id)
    }

    /// Records in segment-id order.
    pub fn records(&self) -> impl Iterator<Item = &SegmentRecord> {
        self.records.values()
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    /// The index recomputed from scratch; equals `index()` at all times.
    pub fn rebuilt_index(&self) -> Index {
        build_index(self.records.values())
    }

    pub fn insert(&mut self, record: SegmentRecord) -> Result<&SegmentRecord, StoreError> {
        if !is_valid_segment_id(&record.segment_id) {
            return Err(StoreError::InvalidId(record.segment_id));
        }
        if self.records.contains_key(&record.segment_id) {
            return Err(StoreError::DuplicateSegment(record.segment_id));
        }
        add_to_index(&mut self.index, &record);
        let id = record.segment_id.clone();
        Ok(self.records.entry(id).or_insert(record))
    }

    /// Parses a Standard MIDI File and stores it under `segment_id` with the
    /// given tags. The header key comes from the file's key signature, then
    /// the key tag, then key detection.
    pub fn ingest(
        &mut self,
        segment_id: &str,
        midi_bytes: &[u8],
        tags: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<&SegmentRecord, StoreError> {
        let record = build_record(segment_id, midi_bytes, Tags::from_json(tags)?)?;
        self.insert(record)
    }

    /// Best-scoring record; ties go to the smallest segment id.
    pub fn retrieve(&self, plan: &AttributeSet) -> Result<&SegmentRecord, StoreError> {
        let first = self.records.values().next().ok_or(StoreError::EmptyDatabase)?;
        let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
        for attribute in &plan.attributes {
            let Some(ids) = self
                .index
                .get(&attribute.id())
                .and_then(|by_value| by_value.get(&attribute.value.match_key()))
            else {
                continue;
            };
            for id in ids {
                *totals.entry(id.as_str()).or_insert(0.0) += attribute.weight;
            }
        }
        let mut best: Option<(&str, f64)> = None;
        for (&id, &total) in &totals {
            if best.is_none_or(|(_, b)| total > b) {
                best = Some((id, total));
            }
        }
        match best {
            Some((id, total)) if total > 0.0 => Ok(&self.records[id]),
            // Every record scores zero.
            _ => Ok(first),
        }
    }
}

pub(crate) fn build_record(segment_id: &str, midi_bytes: &[u8], tags: Tags) -> Result<SegmentRecord, StoreError> {
    if !is_valid_segment_id(segment_id) {
        return Err(StoreError::InvalidId(segment_id.to_string()));
    }
    let parsed = read_smf(midi_bytes)?;
    let provenance = Provenance::from_segment(segment_id);
    let key = match (parsed.key_signature, tags.get(AttributeId::Key)) {
        (Some(signature), _) => signature.to_key(),
        (None, Some(AttributeValue::Key(k))) => *k,
        _ => {
            let draft = parsed.into_prompt(crate::model::Key::C_MAJOR, provenance.clone())?;
            detect_key(&draft).unwrap_or(crate::model::Key::C_MAJOR)
        }
    };
    let content = parsed.into_prompt(key, provenance)?;
    Ok(SegmentRecord {
        segment_id: segment_id.to_string(),
        content,
        tags,
    })
}

#[cfg(test)]
mod tests;
