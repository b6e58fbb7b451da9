use serde::{Deserialize, Serialize};

use super::vocab::{AttributeClass, AttributeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub id: AttributeId,
    pub class: AttributeClass,
    pub requested: String,
    /// `None` when the property cannot be measured from notes.
    pub detected: Option<String>,
    pub matched: bool,
    pub verifiable: bool,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub per_attribute: Vec<AlignmentEntry>,
    pub overall_match: bool,
    /// Non-global mismatches; reported, never fatal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AlignmentReport {
    /// Derives `overall_match` (all global entries matched) and the warning
    /// list from the entries.
    pub fn from_entries(per_attribute: Vec<AlignmentEntry>) -> AlignmentReport {
        let overall_match = per_attribute
            .iter()
            .filter(|e| e.class == AttributeClass::Global)
            .all(|e| e.matched);
        let warnings = per_attribute
            .iter()
            .filter(|e| e.class != AttributeClass::Global && !e.matched)
            .map(|e| format!("{} does not match the request: {}", e.id, e.explanation))
            .collect();
        AlignmentReport {
            per_attribute,
            overall_match,
            warnings,
        }
    }

    pub fn entry(&self, id: AttributeId) -> Option<&AlignmentEntry> {
        self.per_attribute.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderBackendKind {
    LocalSynth,
    ExternalLmm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderResult {
    /// Blob reference of the produced artifact, e.g. `sha256:<hex>.mid`.
    pub output_ref: String,
    pub backend: RenderBackendKind,
    pub report: AlignmentReport,
    /// SHA-256 of the request sent to an external backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: AttributeId, matched: bool) -> AlignmentEntry {
        AlignmentEntry {
            id,
            class: id.class(),
            requested: "x".into(),
            detected: Some("y".into()),
            matched,
            verifiable: true,
            explanation: "e".into(),
        }
    }

    #[test]
    fn only_global_entries_decide_overall_match() {
        let report = AlignmentReport::from_entries(vec![
            entry(AttributeId::Key, true),
            entry(AttributeId::RhythmPattern, false),
        ]);
        assert!(report.overall_match);
        assert_eq!(report.warnings.len(), 1);
        let report = AlignmentReport::from_entries(vec![
            entry(AttributeId::Tempo, false),
            entry(AttributeId::Mood, true),
        ]);
        assert!(!report.overall_match);
        assert!(AlignmentReport::from_entries(vec![]).overall_match);
    }
}
