//! Free-text intent → explained attribute plan, plus reflective questions
//! when a learner edits the plan.
//!
//! The offline interpreter resolves each attribute id from, in order:
//! explicit patterns ("D minor", "90 bpm", "3/4", "I-V-vi-IV"), keywords
//! that state a value, keywords that merely imply one, and finally the
//! key/tempo defaults. Within each tier the first hit in the text wins.

pub mod lexicon;
pub mod llm;
pub mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Attribute, AttributeClass, AttributeId, AttributeSet, AttributeValue, ChordProgression, Key, Meter, Mood,
    Tempo, TempoBucket, MAX_BPM, MIN_BPM,
};

pub use lexicon::{Hit, Lexicon, LexiconEntry};
pub use llm::LlmConfig;
pub use templates::Templates;

pub const DEFAULT_KEY: Key = Key::C_MAJOR;
pub const DEFAULT_TEMPO_BUCKET: TempoBucket = TempoBucket::Medium;

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("intent text is empty")]
    EmptyIntent,
    #[error("interpreter backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("interpreter backend returned malformed output: {0}")]
    MalformedBackendOutput(String),
}

/// A lexicon or template file that does not fit the vocabulary.
#[derive(Debug, Clone, Error)]
#[error("{registry}: {message}")]
pub struct RegistryError {
    pub registry: &'static str,
    pub message: String,
}

impl RegistryError {
    pub(crate) fn new(registry: &'static str, message: impl fmt::Display) -> RegistryError {
        RegistryError {
            registry,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ExternalLlm,
    LexiconFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InterpreterBackend {
    LexiconFallback,
    ExternalLlm(LlmConfig),
}

impl InterpreterBackend {
    /// External when an endpoint is configured in the environment,
    /// otherwise the lexicon.
    pub fn from_env() -> InterpreterBackend {
        LlmConfig::from_env().map_or(InterpreterBackend::LexiconFallback, InterpreterBackend::ExternalLlm)
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            InterpreterBackend::LexiconFallback => BackendKind::LexiconFallback,
            InterpreterBackend::ExternalLlm(_) => BackendKind::ExternalLlm,
        }
    }
}

/// Result of [`Interpreter::interpret_with_fallback`].
#[derive(Debug)]
pub struct Interpretation {
    pub plan: AttributeSet,
    /// Backend that produced `plan`.
    pub backend: BackendKind,
    pub fallback_used: bool,
    /// Why the external backend was abandoned.
    pub error: Option<InterpretError>,
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Stated,
    Implied(String),
    Default,
}

struct Patterns {
    key: Regex,
    bpm: Regex,
    meter: Regex,
    progression: Regex,
}

fn patterns() -> &'static Patterns {
    static PATTERNS: OnceLock<Patterns> = OnceLock::new();
    PATTERNS.get_or_init(|| Patterns {
        // The tonic must be a capital letter so that the article "a" in
        // "a minor key" is not read as A.
        key: Regex::new(r"\b([A-G](?:#|♯|♭|b|-sharp|-flat|\s+sharp|\s+flat)?)\s*(?i:(major|minor))\b").unwrap(),
        bpm: Regex::new(r"(?i)\b(\d{1,4})\s*(?:bpm|beats per minute)\b").unwrap(),
        meter: Regex::new(r"\b(2/4|3/4|4/4|6/8)\b").unwrap(),
        progression: Regex::new(r"\b([ivIV]{1,3}(?:\s*-\s*[ivIV]{1,3}){2,3})\b").unwrap(),
    })
}

/// Values stated by explicit patterns, in text order.
fn pattern_values(text: &str) -> Vec<(usize, AttributeValue)> {
    let p = patterns();
    let mut found = Vec::new();
    for c in p.key.captures_iter(text) {
        if let Ok(key) = format!("{} {}", &c[1], &c[2]).parse::<Key>() {
            found.push((c.get(0).unwrap().start(), AttributeValue::Key(key)));
        }
    }
    for c in p.bpm.captures_iter(text) {
        let bpm = c[1].parse::<u32>().unwrap_or(0).clamp(MIN_BPM as u32, MAX_BPM as u32) as u16;
        let tempo = Tempo::new(bpm).expect("clamped into range");
        found.push((c.get(0).unwrap().start(), AttributeValue::Tempo(tempo)));
    }
    for c in p.meter.captures_iter(text) {
        if let Ok(meter) = c[1].parse::<Meter>() {
            found.push((c.get(0).unwrap().start(), AttributeValue::Meter(meter)));
        }
    }
    for c in p.progression.captures_iter(text) {
        if let Ok(progression) = c[1].parse::<ChordProgression>() {
            found.push((c.get(0).unwrap().start(), AttributeValue::ChordProgression(progression)));
        }
    }
    found.sort_by_key(|(pos, _)| *pos);
    found
}

fn default_value(id: AttributeId) -> Option<AttributeValue> {
    match id {
        AttributeId::Key => Some(AttributeValue::Key(DEFAULT_KEY)),
        AttributeId::Tempo => Some(AttributeValue::Tempo(Tempo::from_bucket(DEFAULT_TEMPO_BUCKET))),
        _ => None,
    }
}

fn mood_of(plan: &AttributeSet) -> Option<Mood> {
    match plan.value(AttributeId::Mood) {
        Some(AttributeValue::Mood(m)) => Some(m),
        _ => None,
    }
}

/// The lexicon and template registries plus the operations built on them.
#[derive(Debug, Clone)]
pub struct Interpreter {
    lexicon: Lexicon,
    templates: Templates,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter::new(Lexicon::shipped(), Templates::shipped())
    }
}

impl Interpreter {
    pub fn new(lexicon: Lexicon, templates: Templates) -> Interpreter {
        Interpreter { lexicon, templates }
    }

    /// Loads registries from JSON files, validating them against the
    /// vocabulary.
    pub fn from_files(
        lexicon: &std::path::Path,
        templates: &std::path::Path,
    ) -> Result<Interpreter, RegistryError> {
        let read = |path: &std::path::Path| {
            std::fs::read_to_string(path).map_err(|e| RegistryError::new("registry", format!("{}: {e}", path.display())))
        };
        Ok(Interpreter::new(
            Lexicon::from_json_str(&read(lexicon)?)?,
            Templates::from_json_str(&read(templates)?)?,
        ))
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn explain(&self, attribute: &Attribute) -> String {
        self.templates.explain(&attribute.value)
    }

    /// Offline interpretation. Total for any non-blank text.
    pub fn interpret_local(&self, text: &str) -> Result<AttributeSet, InterpretError> {
        if text.trim().is_empty() {
            return Err(InterpretError::EmptyIntent);
        }
        let mut chosen: BTreeMap<AttributeId, (AttributeValue, Source)> = BTreeMap::new();
        let mut implied: BTreeMap<AttributeId, (AttributeValue, String)> = BTreeMap::new();
        for (_, value) in pattern_values(text) {
            chosen.entry(value.id()).or_insert((value, Source::Stated));
        }
        let hits = self.lexicon.hits(text);
        for hit in hits.iter().filter(|h| h.explicit) {
            chosen.entry(hit.value.id()).or_insert((hit.value, Source::Stated));
        }
        for hit in hits.iter().filter(|h| !h.explicit) {
            implied
                .entry(hit.value.id())
                .or_insert_with(|| (hit.value, hit.keyword.clone()));
        }
        for (id, (value, keyword)) in &implied {
            chosen.entry(*id).or_insert((*value, Source::Implied(keyword.clone())));
        }
        for id in [AttributeId::Key, AttributeId::Tempo] {
            if let Some(value) = default_value(id) {
                chosen.entry(id).or_insert((value, Source::Default));
            }
        }

        let mood = chosen.get(&AttributeId::Mood).and_then(|(v, _)| match v {
            AttributeValue::Mood(m) => Some(*m),
            _ => None,
        });
        let quality = self.templates.quality(mood).to_string();
        let attributes = AttributeId::ALL
            .iter()
            .filter_map(|id| chosen.get(id))
            .map(|(value, source)| {
                let mut explanation = self.templates.explain(value);
                match source {
                    Source::Implied(keyword) => {
                        explanation = format!("{explanation} {}", self.templates.source_note("implied", keyword))
                    }
                    Source::Default => {
                        explanation = format!("{explanation} {}", self.templates.source_note("default", ""))
                    }
                    Source::Stated => {}
                }
                let mut attribute = Attribute::new(*value, explanation);
                // A stated global value that departs from what a keyword
                // implied is kept, and the learner is asked about it.
                if value.id().class() == AttributeClass::Global && *source == Source::Stated {
                    if let Some((other, keyword)) = implied.get(&value.id()) {
                        if !other.matches(value) {
                            attribute.reflective_question = Some(self.templates.question(
                                "override",
                                &[
                                    ("label", value.id().label()),
                                    ("new", &value.to_string()),
                                    ("implied", &other.to_string()),
                                    ("source", keyword),
                                    ("quality", &quality),
                                ],
                            ));
                        }
                    }
                }
                attribute
            })
            .collect();
        Ok(AttributeSet::new(text, attributes))
    }

    /// Interprets with the given backend, without falling back.
    pub async fn interpret(&self, text: &str, backend: &InterpreterBackend) -> Result<AttributeSet, InterpretError> {
        match backend {
            InterpreterBackend::LexiconFallback => self.interpret_local(text),
            InterpreterBackend::ExternalLlm(config) => {
                if text.trim().is_empty() {
                    return Err(InterpretError::EmptyIntent);
                }
                llm::interpret_external(self, config, text).await
            }
        }
    }

    /// Interprets with `backend`, dropping to the lexicon when an external
    /// backend is unreachable or replies with something unusable.
    pub async fn interpret_with_fallback(
        &self,
        text: &str,
        backend: &InterpreterBackend,
    ) -> Result<Interpretation, InterpretError> {
        match self.interpret(text, backend).await {
            Ok(plan) => Ok(Interpretation {
                plan,
                backend: backend.kind(),
                fallback_used: false,
                error: None,
            }),
            Err(InterpretError::EmptyIntent) => Err(InterpretError::EmptyIntent),
            Err(error) => Ok(Interpretation {
                plan: self.interpret_local(text)?,
                backend: BackendKind::LexiconFallback,
                fallback_used: true,
                error: Some(error),
            }),
        }
    }

    /// One question per attribute id whose value differs between the two
    /// plans, in vocabulary order.
    pub fn reflective_questions(&self, before: &AttributeSet, after: &AttributeSet) -> Vec<String> {
        let quality = self
            .templates
            .quality(mood_of(after).or_else(|| mood_of(before)))
            .to_string();
        let mut questions = Vec::new();
        for id in AttributeId::ALL {
            let label = id.label();
            let question = match (before.value(id), after.value(id)) {
                (Some(old), Some(new)) if old != new => self.templates.question(
                    Templates::change_kind(&old, &new),
                    &[
                        ("label", label),
                        ("old", &old.to_string()),
                        ("new", &new.to_string()),
                        ("quality", &quality),
                    ],
                ),
                (None, Some(new)) => self.templates.question(
                    "added",
                    &[("label", label), ("new", &new.to_string()), ("quality", &quality)],
                ),
                (Some(old), None) => self.templates.question(
                    "removed",
                    &[("label", label), ("old", &old.to_string()), ("quality", &quality)],
                ),
                _ => continue,
            };
            questions.push(question);
        }
        questions
    }
}

pub(crate) fn shared() -> &'static Interpreter {
    static SHARED: OnceLock<Interpreter> = OnceLock::new();
    SHARED.get_or_init(Interpreter::default)
}

/// Offline interpretation with the shipped registries.
pub fn interpret_local(text: &str) -> Result<AttributeSet, InterpretError> {
    shared().interpret_local(text)
}

pub async fn interpret(text: &str, backend: &InterpreterBackend) -> Result<AttributeSet, InterpretError> {
    shared().interpret(text, backend).await
}

pub fn explain(attribute: &Attribute) -> String {
    shared().explain(attribute)
}

pub fn reflective_questions(before: &AttributeSet, after: &AttributeSet) -> Vec<String> {
    shared().reflective_questions(before, after)
}
