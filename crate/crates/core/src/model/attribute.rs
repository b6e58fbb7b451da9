use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::vocab::{AttributeClass, AttributeId, AttributeValue};

/// One planned attribute: a vocabulary value plus its class, weight and
/// the plain-language rationale shown to the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    #[serde(flatten)]
    pub value: AttributeValue,
    pub class: AttributeClass,
    pub weight: f64,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflective_question: Option<String>,
}

impl Attribute {
    /// Builds an attribute with its class and class-default weight.
    pub fn new(value: AttributeValue, explanation: impl Into<String>) -> Attribute {
        let class = value.id().class();
        Attribute {
            value,
            class,
            weight: class.default_weight(),
            explanation: explanation.into(),
            reflective_question: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Attribute, Violation> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Violation::new(
                Some(self.id()),
                ViolationRule::WeightOutOfRange,
                format!("weight {weight} is outside [0, 1]"),
            ));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn id(&self) -> AttributeId {
        self.value.id()
    }
}

/// The structured plan derived from one natural-language intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSet {
    pub attributes: Vec<Attribute>,
    pub source_text: String,
    /// Refinement rule names proposed by an external interpreter. The
    /// refiner checks them against its registry before use.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggested_rules: Vec<String>,
}

impl AttributeSet {
    pub fn new(source_text: impl Into<String>, attributes: Vec<Attribute>) -> AttributeSet {
        AttributeSet {
            attributes,
            source_text: source_text.into(),
            suggested_rules: Vec::new(),
        }
    }

    pub fn get(&self, id: AttributeId) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.id() == id)
    }

    pub fn value(&self, id: AttributeId) -> Option<AttributeValue> {
        self.get(id).map(|a| a.value)
    }

    pub fn get_mut(&mut self, id: AttributeId) -> Option<&mut Attribute> {
        self.attributes.iter_mut().find(|a| a.id() == id)
    }

    /// Replaces the attribute with the same id, or appends it.
    pub fn set(&mut self, attribute: Attribute) {
        match self.get_mut(attribute.id()) {
            Some(slot) => *slot = attribute,
            None => self.attributes.push(attribute),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.attributes.iter().map(|a| a.weight).sum()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_attribute_set(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationRule {
    DuplicateId,
    WeightOutOfRange,
    ClassMismatch,
    ValueOutOfDomain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub attribute: Option<AttributeId>,
    pub rule: ViolationRule,
    pub message: String,
}

impl Violation {
    pub fn new(attribute: Option<AttributeId>, rule: ViolationRule, message: impl Into<String>) -> Self {
        Violation {
            attribute,
            rule,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.attribute {
            Some(id) => write!(f, "{id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Lists every invariant breach in `plan`; empty means valid.
pub fn validate_attribute_set(plan: &AttributeSet) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for attribute in &plan.attributes {
        let id = attribute.id();
        if !seen.insert(id) {
            violations.push(Violation::new(
                Some(id),
                ViolationRule::DuplicateId,
                format!("attribute {id} appears more than once"),
            ));
        }
        if !(0.0..=1.0).contains(&attribute.weight) {
            violations.push(Violation::new(
                Some(id),
                ViolationRule::WeightOutOfRange,
                format!("weight {} is outside [0, 1]", attribute.weight),
            ));
        }
        if attribute.class != id.class() {
            violations.push(Violation::new(
                Some(id),
                ViolationRule::ClassMismatch,
                format!(
                    "{id} is a {} attribute, not {}",
                    id.class().as_str(),
                    attribute.class.as_str()
                ),
            ));
        }
        if let Err(e) = attribute.value.check() {
            violations.push(Violation::new(
                Some(id),
                ViolationRule::ValueOutOfDomain,
                e.to_string(),
            ));
        }
    }
    violations
}
