//! Explanation and question wording, loaded from a JSON registry.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::RegistryError;
use crate::model::{AttributeId, AttributeValue, Mode, Mood};

const SHIPPED: &str = include_str!("../../data/templates.json");

#[derive(Debug, Clone, Deserialize)]
struct RawTemplates {
    version: u32,
    explanations: BTreeMap<String, String>,
    qualities: BTreeMap<String, String>,
    questions: BTreeMap<String, String>,
    sources: BTreeMap<String, String>,
    alignment: BTreeMap<String, String>,
}

const QUESTION_KINDS: [&str; 9] = [
    "tempo:slower",
    "tempo:faster",
    "key:darker",
    "key:brighter",
    "key:same_mode",
    "changed",
    "added",
    "removed",
    "override",
];

#[derive(Debug, Clone)]
pub struct Templates {
    explanations: BTreeMap<String, String>,
    qualities: BTreeMap<String, String>,
    questions: BTreeMap<String, String>,
    sources: BTreeMap<String, String>,
    alignment: BTreeMap<String, String>,
}

const ALIGNMENT_KINDS: [&str; 5] = [
    "matched",
    "mismatched",
    "undetected",
    "descriptive_matched",
    "descriptive_unverified",
];

/// Replaces `{name}` placeholders.
pub(crate) fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// Registry keys tried for a value, most specific first.
fn explanation_keys(value: &AttributeValue) -> Vec<String> {
    let id = value.id().as_str();
    let mut keys = vec![format!("{id}:{value}")];
    match value {
        AttributeValue::Key(k) => keys.push(format!("key:{}", k.mode)),
        AttributeValue::Tempo(t) => keys.push(format!("tempo:{}", t.bucket)),
        AttributeValue::ChordProgression(_) => keys.push("chord_progression:*".into()),
        _ => {}
    }
    keys
}

impl Templates {
    pub fn shipped() -> Templates {
        Templates::from_json_str(SHIPPED).expect("shipped template registry is valid")
    }

    /// Parses a registry and checks that every vocabulary value has an
    /// explanation and every question kind is present.
    pub fn from_json_str(text: &str) -> Result<Templates, RegistryError> {
        let raw: RawTemplates = serde_json::from_str(text).map_err(|e| RegistryError::new("templates", e))?;
        if raw.version != 1 {
            return Err(RegistryError::new("templates", format!("unsupported version {}", raw.version)));
        }
        let templates = Templates {
            explanations: raw.explanations,
            qualities: raw.qualities,
            questions: raw.questions,
            sources: raw.sources,
            alignment: raw.alignment,
        };
        for id in AttributeId::ALL {
            let mut values = id.domain();
            if id == AttributeId::Key {
                values.extend(crate::model::Key::all().into_iter().map(AttributeValue::Key));
            }
            for value in values {
                if templates.explanation_template(&value).is_none() {
                    return Err(RegistryError::new("templates", format!("no explanation for {id} = {value}")));
                }
            }
        }
        for kind in QUESTION_KINDS {
            if !templates.questions.contains_key(kind) {
                return Err(RegistryError::new("templates", format!("missing question template {kind:?}")));
            }
        }
        for kind in ALIGNMENT_KINDS {
            if !templates.alignment.contains_key(kind) {
                return Err(RegistryError::new("templates", format!("missing alignment template {kind:?}")));
            }
        }
        for kind in ["implied", "default"] {
            if !templates.sources.contains_key(kind) {
                return Err(RegistryError::new("templates", format!("missing source note {kind:?}")));
            }
        }
        if !templates.qualities.contains_key("*") {
            return Err(RegistryError::new("templates", "qualities need a \"*\" fallback"));
        }
        for key in templates.explanations.keys() {
            let Some((id, _)) = key.split_once(':') else {
                return Err(RegistryError::new("templates", format!("explanation key {key:?} lacks an id")));
            };
            id.parse::<AttributeId>().map_err(|e| RegistryError::new("templates", e))?;
        }
        Ok(templates)
    }

    fn explanation_template(&self, value: &AttributeValue) -> Option<&str> {
        explanation_keys(value)
            .iter()
            .find_map(|k| self.explanations.get(k))
            .map(String::as_str)
    }

    pub fn explain(&self, value: &AttributeValue) -> String {
        let template = self
            .explanation_template(value)
            .expect("registry covers the vocabulary");
        fill(template, &[("value", &value.to_string())])
    }

    /// Note appended to an explanation for a value the text did not state.
    pub(crate) fn source_note(&self, kind: &str, keyword: &str) -> String {
        fill(&self.sources[kind], &[("keyword", keyword)])
    }

    /// Wording for one alignment report entry.
    pub fn alignment(&self, kind: &str, vars: &[(&str, &str)]) -> String {
        fill(&self.alignment[kind], vars)
    }

    /// The expressive quality a mood stands for, e.g. happy → brightness.
    pub fn quality(&self, mood: Option<Mood>) -> &str {
        mood.and_then(|m| self.qualities.get(m.as_str()))
            .or_else(|| self.qualities.get("*"))
            .map(String::as_str)
            .unwrap_or("feeling")
    }

    pub(crate) fn question(&self, kind: &str, vars: &[(&str, &str)]) -> String {
        fill(&self.questions[kind], vars)
    }

    /// Picks the question kind for a value change.
    pub(crate) fn change_kind(before: &AttributeValue, after: &AttributeValue) -> &'static str {
        match (before, after) {
            (AttributeValue::Tempo(b), AttributeValue::Tempo(a)) if a.bpm < b.bpm => "tempo:slower",
            (AttributeValue::Tempo(b), AttributeValue::Tempo(a)) if a.bpm > b.bpm => "tempo:faster",
            (AttributeValue::Key(b), AttributeValue::Key(a)) => match (b.mode, a.mode) {
                (Mode::Major, Mode::Minor) => "key:darker",
                (Mode::Minor, Mode::Major) => "key:brighter",
                _ => "key:same_mode",
            },
            _ => "changed",
        }
    }
}
