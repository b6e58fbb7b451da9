//! Client for an external music-model renderer.
//!
//! Request: `POST <endpoint>` with
//! `{"symbolic_prompt", "plan_summary", "text_prompt"}` and an optional
//! bearer token. A 2xx reply body is stored as the audio artifact; 4xx is a
//! refusal; anything else, including a timeout, means unavailable. Every
//! attempt appends one line to the NDJSON audit log.

use std::fs::OpenOptions;
use std::io::Write;
use std::time::Duration;

use chrono::Utc;
use serde_json::{json, Value};

use super::{align, RenderError, Renderer};
use crate::blobs::sha256_hex;
use crate::model::{AttributeId, AttributeSet, AttributeValue, RenderBackendKind, RenderResult, SymbolicPrompt};

pub const ENV_ENDPOINT: &str = "MUSICSCAFFOLD_LMM_URL";
pub const ENV_API_KEY: &str = "MUSICSCAFFOLD_LMM_KEY";
pub const ENV_TIMEOUT: &str = "MUSICSCAFFOLD_LMM_TIMEOUT_SECS";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

pub const CAVEAT: &str =
    "The alignment report describes the symbolic sketch sent to the music model, not the audio it returned.";

#[derive(Debug, Clone, PartialEq)]
pub struct LmmConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl LmmConfig {
    pub fn new(endpoint: impl Into<String>) -> LmmConfig {
        LmmConfig {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn from_env() -> Option<LmmConfig> {
        let endpoint = std::env::var(ENV_ENDPOINT).ok().filter(|s| !s.trim().is_empty())?;
        let timeout = std::env::var(ENV_TIMEOUT)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .map_or(DEFAULT_TIMEOUT, Duration::from_secs);
        Some(LmmConfig {
            endpoint,
            api_key: std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty()),
            timeout,
        })
    }
}

/// A one-line description of the plan for text-conditioned models.
pub fn text_prompt(plan: &AttributeSet) -> String {
    let value = |id| plan.value(id).map(|v: AttributeValue| v.to_string());
    let mut words = Vec::new();
    words.extend(value(AttributeId::Mood));
    words.extend(value(AttributeId::Genre).map(|g| g.replace('_', " ")));
    words.push("piece".to_string());
    let mut text = words.join(" ");
    let mut details = Vec::new();
    if let Some(k) = value(AttributeId::Key) {
        details.push(format!("in {k}"));
    }
    if let Some(AttributeValue::Tempo(t)) = plan.value(AttributeId::Tempo) {
        details.push(format!("at {} bpm", t.bpm));
    }
    if let Some(m) = value(AttributeId::Meter) {
        details.push(format!("in {m} time"));
    }
    if let Some(r) = value(AttributeId::RhythmPattern) {
        details.push(format!("with a {r} rhythm"));
    }
    if let Some(c) = value(AttributeId::ChordProgression) {
        details.push(format!("over {c} chords"));
    }
    if let Some(d) = value(AttributeId::Density) {
        details.push(format!("with {d} texture"));
    }
    if let Some(t) = value(AttributeId::Timbre) {
        details.push(format!("featuring {t} sound"));
    }
    if !details.is_empty() {
        text = format!("{text} {}", details.join(", "));
    }
    let article = if text.starts_with(['a', 'e', 'i', 'o', 'u']) { "An" } else { "A" };
    format!("{article} {text}")
}

pub fn request_body(prompt: &SymbolicPrompt, plan: &AttributeSet) -> Value {
    let summary: Vec<Value> = plan
        .attributes
        .iter()
        .map(|a| json!({"id": a.id(), "value": a.value.value_json()}))
        .collect();
    json!({
        "symbolic_prompt": prompt,
        "plan_summary": summary,
        "text_prompt": text_prompt(plan),
    })
}

fn extension_for(content_type: Option<&str>) -> &'static str {
    let essence = content_type
        .and_then(|c| c.split(';').next())
        .map(|c| c.trim().to_ascii_lowercase());
    match essence.as_deref() {
        Some("audio/wav" | "audio/x-wav" | "audio/wave") => "wav",
        Some("audio/mpeg" | "audio/mp3") => "mp3",
        Some("audio/ogg") => "ogg",
        Some("audio/flac") => "flac",
        Some("audio/midi" | "audio/x-midi") => "mid",
        _ => "bin",
    }
}

impl Renderer {
    fn audit(&self, record: Value) -> Result<(), RenderError> {
        if let Some(parent) = self.audit_log.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.audit_log)?;
        let mut line = serde_json::to_vec(&record).expect("audit record serializes");
        line.push(b'\n');
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(())
    }
}

pub(crate) async fn render_external(
    renderer: &Renderer,
    config: &LmmConfig,
    prompt: &SymbolicPrompt,
    plan: &AttributeSet,
) -> Result<RenderResult, RenderError> {
    let body = serde_json::to_vec(&request_body(prompt, plan)).expect("request serializes");
    let request_hash = sha256_hex(&body);
    let mut request = renderer
        .client
        .post(&config.endpoint)
        .timeout(config.timeout)
        .header("content-type", "application/json")
        .body(body);
    if let Some(key) = &config.api_key {
        request = request.bearer_auth(key);
    }

    let outcome = async {
        let response = request
            .send()
            .await
            .map_err(|e| RenderError::BackendUnavailable(e.to_string()))?;
        let status = response.status();
        if status.is_client_error() {
            let detail = response.text().await.unwrap_or_default();
            return Err(RenderError::RenderRejected(format!("{status}: {}", detail.chars().take(200).collect::<String>())));
        }
        if !status.is_success() {
            return Err(RenderError::BackendUnavailable(format!("service answered {status}")));
        }
        let ext = extension_for(response.headers().get("content-type").and_then(|v| v.to_str().ok()));
        let bytes = response
            .bytes()
            .await
            .map_err(|e| RenderError::BackendUnavailable(e.to_string()))?;
        if bytes.is_empty() {
            return Err(RenderError::BackendUnavailable("service returned an empty body".into()));
        }
        let (output_ref, _) = renderer.blobs.put(&bytes, ext)?;
        Ok(output_ref)
    }
    .await;

    let (status, detail) = match &outcome {
        Ok(r) => ("ok", r.clone()),
        Err(RenderError::RenderRejected(m)) => ("rejected", m.clone()),
        Err(e) => ("unavailable", e.to_string()),
    };
    renderer.audit(json!({
        "at": Utc::now().to_rfc3339(),
        "backend": RenderBackendKind::ExternalLmm,
        "endpoint": config.endpoint,
        "request_hash": request_hash,
        "outcome": status,
        "detail": detail,
    }))?;

    let output_ref = outcome?;
    Ok(RenderResult {
        output_ref,
        backend: RenderBackendKind::ExternalLmm,
        report: align(prompt, plan),
        request_hash: Some(request_hash),
        caveat: Some(CAVEAT.to_string()),
    })
}
