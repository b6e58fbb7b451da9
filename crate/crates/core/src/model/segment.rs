use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::prompt::SymbolicPrompt;
use super::vocab::{AttributeId, AttributeValue, DomainError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("unknown attribute id {0:?}")]
    UnknownId(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Indexed segment metadata: at most one value per attribute id.
///
/// Encoded as a JSON object `{ "<id>": <value>, ... }` using the same value
/// encodings as attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tags(BTreeMap<AttributeId, AttributeValue>);

impl Tags {
    pub fn new() -> Tags {
        Tags::default()
    }

    pub fn insert(&mut self, value: AttributeValue) -> Option<AttributeValue> {
        self.0.insert(value.id(), value)
    }

    pub fn with(mut self, value: AttributeValue) -> Tags {
        self.insert(value);
        self
    }

    pub fn get(&self, id: AttributeId) -> Option<&AttributeValue> {
        self.0.get(&id)
    }

    pub fn remove(&mut self, id: AttributeId) -> Option<AttributeValue> {
        self.0.remove(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AttributeValue> {
        self.0.values()
    }

    /// Parses a loosely typed tag map, reporting the first illegal entry.
    pub fn from_json(map: &serde_json::Map<String, serde_json::Value>) -> Result<Tags, TagError> {
        let mut tags = Tags::new();
        for (name, value) in map {
            let id: AttributeId = name.parse().map_err(|_| TagError::UnknownId(name.clone()))?;
            tags.insert(AttributeValue::from_json(id, value)?);
        }
        Ok(tags)
    }

    pub fn to_json(&self) -> serde_json::Map<String, serde_json::Value> {
        self.0
            .iter()
            .map(|(id, v)| (id.as_str().to_string(), v.value_json()))
            .collect()
    }
}

impl FromIterator<AttributeValue> for Tags {
    fn from_iter<I: IntoIterator<Item = AttributeValue>>(iter: I) -> Self {
        let mut tags = Tags::new();
        for v in iter {
            tags.insert(v);
        }
        tags
    }
}

impl Serialize for Tags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tags {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = serde_json::Map::deserialize(deserializer)?;
        Tags::from_json(&map).map_err(D::Error::custom)
    }
}

/// A database entry: symbolic content plus the tags used for matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub content: SymbolicPrompt,
    pub tags: Tags,
}

/// Segment ids double as file stems, so they are restricted to a
/// filesystem-safe alphabet.
pub fn is_valid_segment_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}
