//! Structured comparison of two sessions.

use serde::{Deserialize, Serialize};

use crate::model::{AlignmentEntry, AttributeId, SessionEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDelta {
    pub id: AttributeId,
    pub before: Option<serde_json::Value>,
    pub after: Option<serde_json::Value>,
}

/// Differences between the latest sketches' provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceDelta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<(Option<String>, Option<String>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules_added: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules_removed: Vec<String>,
}

impl ProvenanceDelta {
    pub fn is_empty(&self) -> bool {
        self.segment.is_none() && self.rules_added.is_empty() && self.rules_removed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub requested: String,
    pub detected: Option<String>,
    pub matched: bool,
}

impl From<&AlignmentEntry> for EntrySummary {
    fn from(e: &AlignmentEntry) -> Self {
        EntrySummary {
            requested: e.requested.clone(),
            detected: e.detected.clone(),
            matched: e.matched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentDelta {
    pub id: AttributeId,
    pub before: Option<EntrySummary>,
    pub after: Option<EntrySummary>,
}

/// What changed from session `a` to session `b`. Swapping the two swaps
/// every before/after pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDiff {
    pub a: String,
    pub b: String,
    pub plan: Vec<PlanDelta>,
    pub provenance: ProvenanceDelta,
    pub alignment: Vec<AlignmentDelta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_match: Option<(Option<bool>, Option<bool>)>,
}

impl SessionDiff {
    pub fn between(a: &SessionEntry, b: &SessionEntry) -> SessionDiff {
        let plan = AttributeId::ALL
            .iter()
            .filter_map(|&id| {
                let before = a.plan.value(id);
                let after = b.plan.value(id);
                (before != after).then(|| PlanDelta {
                    id,
                    before: before.map(|v| v.value_json()),
                    after: after.map(|v| v.value_json()),
                })
            })
            .collect();

        let pa = a.latest_sketch().map(|s| s.provenance());
        let pb = b.latest_sketch().map(|s| s.provenance());
        let seg_a = pa.and_then(|p| p.segment_id.clone());
        let seg_b = pb.and_then(|p| p.segment_id.clone());
        let rules_a: Vec<String> = pa.map(|p| p.rules.clone()).unwrap_or_default();
        let rules_b: Vec<String> = pb.map(|p| p.rules.clone()).unwrap_or_default();
        let provenance = ProvenanceDelta {
            segment: (seg_a != seg_b).then_some((seg_a, seg_b)),
            rules_added: rules_b.iter().filter(|r| !rules_a.contains(r)).cloned().collect(),
            rules_removed: rules_a.iter().filter(|r| !rules_b.contains(r)).cloned().collect(),
        };

        let ra = a.latest_result().map(|r| &r.report);
        let rb = b.latest_result().map(|r| &r.report);
        let alignment = AttributeId::ALL
            .iter()
            .filter_map(|&id| {
                let before = ra.and_then(|r| r.entry(id)).map(EntrySummary::from);
                let after = rb.and_then(|r| r.entry(id)).map(EntrySummary::from);
                (before != after).then_some(AlignmentDelta { id, before, after })
            })
            .collect();
        let oa = ra.map(|r| r.overall_match);
        let ob = rb.map(|r| r.overall_match);

        SessionDiff {
            a: a.session_id.clone(),
            b: b.session_id.clone(),
            plan,
            provenance,
            alignment,
            overall_match: (oa != ob).then_some((oa, ob)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty() && self.provenance.is_empty() && self.alignment.is_empty() && self.overall_match.is_none()
    }
}
