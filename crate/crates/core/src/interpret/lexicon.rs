//! Keyword lexicon for the offline interpreter.
//!
//! Matching is case-insensitive and whole-word over stemmed tokens, so
//! "exciting", "excited" and "excitement" all hit the same entry.
//! Multi-word keywords match consecutive tokens.

use std::collections::BTreeMap;

use rust_stemmers::{Algorithm, Stemmer};
use serde::Deserialize;

use super::RegistryError;
use crate::model::{AttributeId, AttributeValue};

const SHIPPED: &str = include_str!("../../data/lexicon.json");

#[derive(Debug, Deserialize)]
struct RawEntry {
    keywords: Vec<String>,
    #[serde(default)]
    sets: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    implies: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Deserialize)]
struct RawLexicon {
    version: u32,
    entries: Vec<RawEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub keywords: Vec<String>,
    /// Values the keyword states outright.
    pub sets: Vec<AttributeValue>,
    /// Values the keyword usually goes with; used only when nothing in
    /// the text states that attribute.
    pub implies: Vec<AttributeValue>,
    stems: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

/// One keyword occurrence in a text.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    /// Token index of the first matched word.
    pub position: usize,
    pub keyword: String,
    pub value: AttributeValue,
    pub explicit: bool,
}

/// Lower-cased, stemmed word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let stemmer = Stemmer::create(Algorithm::English);
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| stemmer.stem(&w.to_lowercase()).into_owned())
        .collect()
}

fn parse_values(
    map: &BTreeMap<String, serde_json::Value>,
    keyword: &str,
) -> Result<Vec<AttributeValue>, RegistryError> {
    map.iter()
        .map(|(id, value)| {
            let id: AttributeId = id
                .parse()
                .map_err(|e| RegistryError::new("lexicon", format!("{keyword:?}: {e}")))?;
            AttributeValue::from_json(id, value).map_err(|e| RegistryError::new("lexicon", format!("{keyword:?}: {e}")))
        })
        .collect()
}

impl Lexicon {
    pub fn shipped() -> Lexicon {
        Lexicon::from_json_str(SHIPPED).expect("shipped lexicon is valid")
    }

    /// Parses a lexicon file; every id and value must be in the vocabulary.
    pub fn from_json_str(text: &str) -> Result<Lexicon, RegistryError> {
        let raw: RawLexicon = serde_json::from_str(text).map_err(|e| RegistryError::new("lexicon", e))?;
        if raw.version != 1 {
            return Err(RegistryError::new("lexicon", format!("unsupported version {}", raw.version)));
        }
        let mut entries = Vec::with_capacity(raw.entries.len());
        for entry in raw.entries {
            let first = entry.keywords.first().cloned().unwrap_or_default();
            if entry.keywords.is_empty() {
                return Err(RegistryError::new("lexicon", "entry without keywords"));
            }
            if entry.sets.is_empty() && entry.implies.is_empty() {
                return Err(RegistryError::new("lexicon", format!("{first:?} maps to nothing")));
            }
            let stems: Vec<Vec<String>> = entry.keywords.iter().map(|k| tokenize(k)).collect();
            if let Some(pos) = stems.iter().position(Vec::is_empty) {
                return Err(RegistryError::new(
                    "lexicon",
                    format!("keyword {:?} has no words", entry.keywords[pos]),
                ));
            }
            entries.push(LexiconEntry {
                sets: parse_values(&entry.sets, &first)?,
                implies: parse_values(&entry.implies, &first)?,
                keywords: entry.keywords,
                stems,
            });
        }
        Ok(Lexicon { entries })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Every keyword hit in `text`, in text order; hits at the same
    /// position keep lexicon order.
    pub fn hits(&self, text: &str) -> Vec<Hit> {
        let tokens = tokenize(text);
        let mut hits = Vec::new();
        for position in 0..tokens.len() {
            for entry in &self.entries {
                let Some(k) = entry
                    .stems
                    .iter()
                    .position(|stem| tokens[position..].starts_with(stem))
                else {
                    continue;
                };
                let keyword = &entry.keywords[k];
                for (values, explicit) in [(&entry.sets, true), (&entry.implies, false)] {
                    hits.extend(values.iter().map(|value| Hit {
                        position,
                        keyword: keyword.clone(),
                        value: *value,
                        explicit,
                    }));
                }
            }
        }
        hits
    }
}
