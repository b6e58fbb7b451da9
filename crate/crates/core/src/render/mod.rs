//! Turning a confirmed sketch into an artifact, and checking the result
//! against the plan it came from.
//!
//! The local backend's artifact is the sketch's own MIDI file. The external
//! backend sends the sketch to a music-model service and stores whatever
//! audio comes back; its alignment report is still computed on the sketch.

pub mod lmm;

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;
use tokio::sync::Semaphore;

use crate::blobs::BlobStore;
use crate::interpret::Templates;
use crate::midi::emit_midi;
use crate::model::{
    AlignmentEntry, AlignmentReport, AttributeClass, AttributeSet, AttributeValue, RenderBackendKind,
    RenderResult, SymbolicPrompt, Violation,
};
use crate::refine::analysis::{detect_chord_numerals, detect_density, detect_rhythm_pattern};
use crate::refine::detect_key;
use crate::refine::rules::velocity_marker;

pub use lmm::LmmConfig;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("render backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("render service refused the request: {0}")]
    RenderRejected(String),
    #[error("invalid plan: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPlan(Vec<Violation>),
    #[error("prompt has no notes")]
    EmptyPrompt,
    #[error("artifact storage failed: {0}")]
    Storage(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RenderBackend {
    LocalSynth,
    ExternalLmm(LmmConfig),
}

impl RenderBackend {
    pub fn kind(&self) -> RenderBackendKind {
        match self {
            RenderBackend::LocalSynth => RenderBackendKind::LocalSynth,
            RenderBackend::ExternalLmm(_) => RenderBackendKind::ExternalLmm,
        }
    }
}

fn detected_entry(
    templates: &Templates,
    value: &AttributeValue,
    detected: Option<String>,
    matched: bool,
) -> AlignmentEntry {
    let id = value.id();
    let requested = value.to_string();
    let explanation = match &detected {
        None => templates.alignment("undetected", &[("label", id.label()), ("requested", &requested)]),
        Some(d) => {
            let kind = if matched { "matched" } else { "mismatched" };
            templates.alignment(
                kind,
                &[
                    ("label", id.label()),
                    ("requested", &requested),
                    ("detected", d),
                    ("effect", &templates.explain(value)),
                ],
            )
        }
    };
    AlignmentEntry {
        id,
        class: id.class(),
        requested,
        verifiable: detected.is_some(),
        detected,
        matched,
        explanation,
    }
}

/// Descriptive values cannot be read from notes. They count as matched
/// when the source segment was tagged with the value, or, for moods, when
/// velocity shaping for that mood was applied.
fn descriptive_entry(templates: &Templates, prompt: &SymbolicPrompt, value: &AttributeValue) -> AlignmentEntry {
    let id = value.id();
    let provenance = prompt.provenance();
    let tagged = provenance.segment_tags.get(id);
    let shaped = match value {
        AttributeValue::Mood(m) => provenance.notes.contains(&velocity_marker(*m)),
        _ => false,
    };
    let matched = tagged == Some(value) || shaped;
    let requested = value.to_string();
    let kind = if matched {
        "descriptive_matched"
    } else {
        "descriptive_unverified"
    };
    AlignmentEntry {
        id,
        class: id.class(),
        requested: requested.clone(),
        detected: None,
        matched,
        verifiable: false,
        explanation: templates.alignment(kind, &[("label", id.label()), ("requested", &requested)]),
    }
}

/// Per-attribute comparison of the plan with what the sketch contains.
pub fn align_with(templates: &Templates, prompt: &SymbolicPrompt, plan: &AttributeSet) -> AlignmentReport {
    let entries = plan
        .attributes
        .iter()
        .map(|attribute| {
            let value = &attribute.value;
            if attribute.class == AttributeClass::Descriptive {
                return descriptive_entry(templates, prompt, value);
            }
            let (detected, matched) = match value {
                AttributeValue::Key(k) => match detect_key(prompt) {
                    Ok(found) => (Some(found.to_string()), found == *k),
                    Err(_) => (None, false),
                },
                AttributeValue::Tempo(t) => (
                    Some(format!("{} bpm", prompt.tempo_bpm())),
                    prompt.tempo_bpm() == t.bpm,
                ),
                AttributeValue::Meter(m) => (Some(prompt.meter().to_string()), prompt.meter() == *m),
                AttributeValue::Density(d) => {
                    let found = detect_density(prompt);
                    (Some(found.to_string()), found == *d)
                }
                AttributeValue::RhythmPattern(r) => {
                    let found = detect_rhythm_pattern(prompt);
                    (Some(found.to_string()), found == *r)
                }
                AttributeValue::ChordProgression(p) => {
                    let target = p.numerals();
                    let found = detect_chord_numerals(prompt, prompt.key());
                    if found.is_empty() {
                        (None, false)
                    } else {
                        let shown: Vec<&str> = found
                            .iter()
                            .map(|(_, n)| n.map_or("?", |n| n.symbol))
                            .collect();
                        let matched = found
                            .iter()
                            .all(|(t, n)| n.is_some_and(|n| n == target[t % target.len()]));
                        (Some(shown.join("-")), matched)
                    }
                }
                AttributeValue::Mood(_) | AttributeValue::Genre(_) | AttributeValue::Timbre(_) => {
                    unreachable!("descriptive values handled above")
                }
            };
            detected_entry(templates, value, detected, matched)
        })
        .collect();
    AlignmentReport::from_entries(entries)
}

pub fn align(prompt: &SymbolicPrompt, plan: &AttributeSet) -> AlignmentReport {
    align_with(crate::interpret::shared().templates(), prompt, plan)
}

/// Default bound on concurrent external renders.
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Stores artifacts and bounds concurrent external renders. Share one
/// instance across requests.
#[derive(Debug, Clone)]
pub struct Renderer {
    blobs: BlobStore,
    audit_log: PathBuf,
    limiter: Arc<Semaphore>,
    client: reqwest::Client,
}

impl Renderer {
    pub fn new(blobs: BlobStore, audit_log: impl Into<PathBuf>) -> Renderer {
        Renderer::with_limit(blobs, audit_log, DEFAULT_MAX_IN_FLIGHT)
    }

    pub fn with_limit(blobs: BlobStore, audit_log: impl Into<PathBuf>, max_in_flight: usize) -> Renderer {
        Renderer {
            blobs,
            audit_log: audit_log.into(),
            limiter: Arc::new(Semaphore::new(max_in_flight.max(1))),
            client: reqwest::Client::new(),
        }
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    pub fn audit_log(&self) -> &std::path::Path {
        &self.audit_log
    }

    /// Local path only; no runtime needed.
    pub fn render_local(&self, prompt: &SymbolicPrompt, plan: &AttributeSet) -> Result<RenderResult, RenderError> {
        check_inputs(prompt, plan)?;
        let (output_ref, _) = self.blobs.put(&emit_midi(prompt), "mid")?;
        Ok(RenderResult {
            output_ref,
            backend: RenderBackendKind::LocalSynth,
            report: align(prompt, plan),
            request_hash: None,
            caveat: None,
        })
    }

    pub async fn render(
        &self,
        prompt: &SymbolicPrompt,
        plan: &AttributeSet,
        backend: &RenderBackend,
    ) -> Result<RenderResult, RenderError> {
        match backend {
            RenderBackend::LocalSynth => self.render_local(prompt, plan),
            RenderBackend::ExternalLmm(config) => {
                check_inputs(prompt, plan)?;
                let _permit = self.limiter.acquire().await.expect("semaphore is never closed");
                lmm::render_external(self, config, prompt, plan).await
            }
        }
    }
}

fn check_inputs(prompt: &SymbolicPrompt, plan: &AttributeSet) -> Result<(), RenderError> {
    let violations = plan.validate();
    if !violations.is_empty() {
        return Err(RenderError::InvalidPlan(violations));
    }
    if prompt.note_count() == 0 {
        return Err(RenderError::EmptyPrompt);
    }
    Ok(())
}
