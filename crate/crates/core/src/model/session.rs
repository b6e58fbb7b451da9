use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::attribute::AttributeSet;
use super::prompt::SymbolicPrompt;
use super::report::RenderResult;

/// A library record: one intent, its plan, and everything produced from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub intent_text: String,
    pub plan: AttributeSet,
    #[serde(default)]
    pub sketches: Vec<SymbolicPrompt>,
    #[serde(default)]
    pub results: Vec<RenderResult>,
    #[serde(default)]
    pub parent_session: Option<String>,
}

impl SessionEntry {
    pub fn new(plan: AttributeSet) -> SessionEntry {
        SessionEntry {
            session_id: uuid::Uuid::new_v4().to_string(),
            created_at: Utc::now(),
            intent_text: plan.source_text.clone(),
            plan,
            sketches: Vec::new(),
            results: Vec::new(),
            parent_session: None,
        }
    }

    pub fn revision_of(mut self, parent: impl Into<String>) -> SessionEntry {
        self.parent_session = Some(parent.into());
        self
    }

    pub fn latest_sketch(&self) -> Option<&SymbolicPrompt> {
        self.sketches.last()
    }

    pub fn latest_result(&self) -> Option<&RenderResult> {
        self.results.last()
    }
}
