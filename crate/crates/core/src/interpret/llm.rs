//! Client for an external language-model interpreter.
//!
//! Request: `POST <endpoint>` with `{"prompt", "text", "schema"}` and an
//! optional bearer token. The reply is either the plan object itself,
//! `{"attributes": [{"id", "value", "explanation"}], "suggested_rules": [..]}`,
//! or a chat-style wrapper `{"content": "<that object as a JSON string>"}`.
//! A reply that does not validate earns one repair request; a second bad
//! reply is reported as malformed.

use std::collections::BTreeSet;
use std::time::Duration;

use serde_json::{json, Value};

use super::{default_value, InterpretError, Interpreter};
use crate::model::{Attribute, AttributeId, AttributeSet, AttributeValue};

pub const ENV_ENDPOINT: &str = "MUSICSCAFFOLD_LLM_URL";
pub const ENV_API_KEY: &str = "MUSICSCAFFOLD_LLM_KEY";
pub const ENV_TIMEOUT: &str = "MUSICSCAFFOLD_LLM_TIMEOUT_SECS";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(15);

const MAX_REPLY_BYTES: usize = 256 * 1024;
const MAX_EXPLANATION_CHARS: usize = 600;
const MAX_SUGGESTED_RULES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>) -> LlmConfig {
        LlmConfig {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn from_env() -> Option<LlmConfig> {
        let endpoint = std::env::var(ENV_ENDPOINT).ok().filter(|s| !s.trim().is_empty())?;
        let timeout = std::env::var(ENV_TIMEOUT)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .map_or(DEFAULT_TIMEOUT, Duration::from_secs);
        Some(LlmConfig {
            endpoint,
            api_key: std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty()),
            timeout,
        })
    }
}

/// JSON schema of the reply the model is asked to produce.
pub fn reply_schema() -> Value {
    let ids: Vec<&str> = AttributeId::ALL.iter().map(|id| id.as_str()).collect();
    json!({
        "type": "object",
        "required": ["attributes"],
        "properties": {
            "attributes": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["id", "value", "explanation"],
                    "properties": {
                        "id": {"enum": ids},
                        "value": {},
                        "explanation": {"type": "string", "minLength": 1}
                    }
                }
            },
            "suggested_rules": {"type": "array", "items": {"type": "string"}}
        }
    })
}

fn instructions() -> String {
    let mut text = String::from(
        "Turn the learner's description of a piece of music into a JSON object that matches the schema. \
         Use each attribute id at most once and only these values:\n",
    );
    for id in AttributeId::ALL {
        let values: Vec<String> = match id {
            AttributeId::Tempo => vec!["an integer bpm between 40 and 240".into()],
            _ => id.domain().iter().map(|v| v.value_json().to_string()).collect(),
        };
        text.push_str(&format!("- {id}: {}\n", values.join(", ")));
    }
    text.push_str(
        "Give every attribute a one-sentence explanation a teenager can follow. \
         Reply with the JSON object only.",
    );
    text
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let t = t.strip_prefix("```json").or_else(|| t.strip_prefix("```")).unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim()
}

/// Validates a raw reply body into a plan for `source_text`. Weights and
/// questions in the reply are ignored; missing key and tempo are filled
/// with the defaults.
pub fn parse_reply(interpreter: &Interpreter, body: &str, source_text: &str) -> Result<AttributeSet, String> {
    if body.len() > MAX_REPLY_BYTES {
        return Err(format!("reply is {} bytes, limit {MAX_REPLY_BYTES}", body.len()));
    }
    let mut value: Value = serde_json::from_str(strip_fences(body)).map_err(|e| format!("not JSON: {e}"))?;
    if let Some(Value::String(content)) = value.get("content") {
        value = serde_json::from_str(strip_fences(content)).map_err(|e| format!("content is not JSON: {e}"))?;
    }
    let object = value.as_object().ok_or("reply is not a JSON object")?;
    let items = object
        .get("attributes")
        .and_then(Value::as_array)
        .ok_or("reply has no \"attributes\" array")?;

    let mut seen = BTreeSet::new();
    let mut attributes = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let item = item.as_object().ok_or(format!("attributes[{i}] is not an object"))?;
        let id: AttributeId = item
            .get("id")
            .and_then(Value::as_str)
            .ok_or(format!("attributes[{i}] has no string id"))?
            .parse()
            .map_err(|e| format!("attributes[{i}]: {e}"))?;
        if !seen.insert(id) {
            return Err(format!("attribute {id} appears more than once"));
        }
        let raw = item.get("value").ok_or(format!("attributes[{i}] has no value"))?;
        let value = AttributeValue::from_json(id, raw).map_err(|e| format!("attributes[{i}]: {e}"))?;
        let explanation = item
            .get("explanation")
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty() && s.chars().count() <= MAX_EXPLANATION_CHARS)
            .map_or_else(|| interpreter.templates().explain(&value), str::to_string);
        attributes.push(Attribute::new(value, explanation));
    }
    for id in [AttributeId::Key, AttributeId::Tempo] {
        if !seen.contains(&id) {
            let value = default_value(id).expect("key and tempo have defaults");
            let explanation = format!(
                "{} {}",
                interpreter.templates().explain(&value),
                interpreter.templates().source_note("default", "")
            );
            attributes.push(Attribute::new(value, explanation));
        }
    }
    attributes.sort_by_key(|a| AttributeId::ALL.iter().position(|id| *id == a.id()));

    let mut plan = AttributeSet::new(source_text, attributes);
    if let Some(rules) = object.get("suggested_rules") {
        let rules = rules.as_array().ok_or("suggested_rules is not an array")?;
        if rules.len() > MAX_SUGGESTED_RULES {
            return Err(format!("more than {MAX_SUGGESTED_RULES} suggested rules"));
        }
        plan.suggested_rules = rules
            .iter()
            .map(|r| r.as_str().map(str::to_string).ok_or("suggested rule is not a string"))
            .collect::<Result<_, _>>()?;
    }
    let violations = plan.validate();
    if !violations.is_empty() {
        return Err(format!("plan violates invariants: {violations:?}"));
    }
    Ok(plan)
}

async fn post(client: &reqwest::Client, config: &LlmConfig, body: &Value) -> Result<String, InterpretError> {
    let mut request = client.post(&config.endpoint).timeout(config.timeout).json(body);
    if let Some(key) = &config.api_key {
        request = request.bearer_auth(key);
    }
    let unavailable = |e: reqwest::Error| InterpretError::BackendUnavailable(e.to_string());
    let response = request.send().await.map_err(unavailable)?;
    let status = response.status();
    if !status.is_success() {
        return Err(InterpretError::BackendUnavailable(format!("endpoint answered {status}")));
    }
    response.text().await.map_err(unavailable)
}

pub(crate) async fn interpret_external(
    interpreter: &Interpreter,
    config: &LlmConfig,
    text: &str,
) -> Result<AttributeSet, InterpretError> {
    let client = reqwest::Client::new();
    let request = json!({
        "prompt": instructions(),
        "text": text,
        "schema": reply_schema(),
    });
    let first = post(&client, config, &request).await?;
    let problem = match parse_reply(interpreter, &first, text) {
        Ok(plan) => return Ok(plan),
        Err(problem) => problem,
    };
    let repair = json!({
        "prompt": instructions(),
        "text": text,
        "schema": reply_schema(),
        "repair": {"previous_reply": first, "problem": problem},
    });
    let second = post(&client, config, &repair).await?;
    parse_reply(interpreter, &second, text).map_err(InterpretError::MalformedBackendOutput)
}
