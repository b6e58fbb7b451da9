//! Domain types shared by every stage of the pipeline.

mod attribute;
mod prompt;
mod report;
mod segment;
mod session;
pub mod vocab;

pub use attribute::{validate_attribute_set, Attribute, AttributeSet, Violation, ViolationRule};
pub use prompt::{resolve_overlaps, Bar, NoteEvent, PromptError, Provenance, SymbolicPrompt, TimedNote};
pub use report::{AlignmentEntry, AlignmentReport, RenderBackendKind, RenderResult};
pub use segment::{is_valid_segment_id, SegmentRecord, TagError, Tags};
pub use session::SessionEntry;
pub use vocab::{
    AttributeClass, AttributeId, AttributeValue, ChordProgression, Density, DomainError, Genre, Key,
    Meter, Mode, Mood, RhythmPattern, Tempo, TempoBucket, Timbre, MAX_BPM, MIN_BPM, TICKS_PER_QUARTER,
};
