//! Adapting a retrieved segment toward a plan with deterministic
//! music-theory rules.

pub mod analysis;
pub mod key;
pub mod rules;

use thiserror::Error;

use crate::model::{AttributeClass, AttributeSet, Provenance, SegmentRecord, SymbolicPrompt, Tags, Violation};

pub use key::detect_key;
pub use rules::{default_rules, RefinementRule, RuleContext, RuleError, RuleOutcome};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("prompt has no notes")]
    EmptyPrompt,
    #[error("rule {rule} failed{}: {reason}", bar.map(|b| format!(" at bar {b}")).unwrap_or_default())]
    RuleFailure {
        rule: String,
        bar: Option<usize>,
        reason: String,
    },
    #[error("invalid plan: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPlan(Vec<Violation>),
}

const MAX_PASSES: usize = 4;

/// Holds the rule registry and applies it in order.
#[derive(Debug, Clone)]
pub struct Refiner {
    rules: Vec<RefinementRule>,
}

impl Default for Refiner {
    fn default() -> Self {
        Refiner {
            rules: default_rules(),
        }
    }
}

impl Refiner {
    /// A refiner with a custom registry, applied in the given order.
    pub fn with_rules(rules: Vec<RefinementRule>) -> Refiner {
        Refiner { rules }
    }

    pub fn rules(&self) -> &[RefinementRule] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&RefinementRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn refine(&self, segment: &SegmentRecord, plan: &AttributeSet) -> Result<SymbolicPrompt, RefineError> {
        self.refine_prompt(&segment.content, &segment.segment_id, &segment.tags, plan)
    }

    /// Refines `prompt` as if it were the content of segment `segment_id`
    /// carrying `tags`.
    pub fn refine_prompt(
        &self,
        prompt: &SymbolicPrompt,
        segment_id: &str,
        tags: &Tags,
        plan: &AttributeSet,
    ) -> Result<SymbolicPrompt, RefineError> {
        let violations = plan.validate();
        if !violations.is_empty() {
            return Err(RefineError::InvalidPlan(violations));
        }
        if prompt.note_count() == 0 {
            return Err(RefineError::EmptyPrompt);
        }

        let history = prompt.provenance().clone();
        let mut provenance = Provenance {
            segment_id: Some(segment_id.to_string()),
            segment_tags: tags.clone(),
            rules: history.rules.clone(),
            notes: history.notes.clone(),
        };
        let (selected, selection_note) = self.select(plan);
        if let Some(note) = selection_note {
            push_note(&mut provenance, note);
        }

        // Rhythm and density edits can undo each other, so the rule list is
        // repeated until a full pass changes nothing.
        let mut current = prompt.clone();
        for _ in 0..MAX_PASSES {
            let mut changed = false;
            for rule in self.rules.iter().filter(|r| selected.contains(&r.name)) {
                let Some(target) = plan.value(rule.applies_to) else {
                    continue;
                };
                let ctx = RuleContext {
                    segment_tags: tags,
                    history: &provenance,
                };
                let outcome = (rule.transform)(&current, &target, &ctx).map_err(|e| RefineError::RuleFailure {
                    rule: rule.name.to_string(),
                    bar: e.bar,
                    reason: e.reason,
                })?;
                match outcome {
                    RuleOutcome::Unchanged => {}
                    RuleOutcome::Skipped(note) => push_note(&mut provenance, note),
                    RuleOutcome::Applied(next, _) if next.without_provenance() == current.without_provenance() => {}
                    RuleOutcome::Applied(next, note) => {
                        current = next;
                        changed = true;
                        provenance.rules.push(rule.name.to_string());
                        if let Some(note) = note {
                            push_note(&mut provenance, note);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Ok(current.with_provenance(provenance))
    }

    /// Rules allowed to run for this plan. A suggested list may leave out
    /// Local and Descriptive rules but never Global ones, and any unknown
    /// name discards the whole suggestion.
    fn select(&self, plan: &AttributeSet) -> (Vec<&'static str>, Option<String>) {
        let all: Vec<&'static str> = self.rules.iter().map(|r| r.name).collect();
        if plan.suggested_rules.is_empty() {
            return (all, None);
        }
        if let Some(unknown) = plan.suggested_rules.iter().find(|n| self.rule(n).is_none()) {
            return (
                all,
                Some(format!("suggested rules ignored: unknown rule {unknown}")),
            );
        }
        let selected = self
            .rules
            .iter()
            .filter(|r| {
                r.applies_to.class() == AttributeClass::Global
                    || plan.suggested_rules.iter().any(|n| n == r.name)
            })
            .map(|r| r.name)
            .collect();
        (selected, None)
    }
}

fn push_note(provenance: &mut Provenance, note: String) {
    if !provenance.notes.contains(&note) {
        provenance.notes.push(note);
    }
}

pub fn refine(segment: &SegmentRecord, plan: &AttributeSet) -> Result<SymbolicPrompt, RefineError> {
    Refiner::default().refine(segment, plan)
}

#[cfg(test)]
mod tests;
