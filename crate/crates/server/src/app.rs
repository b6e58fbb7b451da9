use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use musicscaffold_core::interpret::{BackendKind, Interpreter, InterpreterBackend};
use musicscaffold_core::library::Library;
use musicscaffold_core::refine::Refiner;
use musicscaffold_core::render::{LmmConfig, RenderBackend, Renderer};
use musicscaffold_core::store::{load_corpus, read_corpus_dir, save_corpus, SegmentDatabase};
use musicscaffold_core::{AlignmentReport, AttributeSet, SegmentRecord, SessionEntry, SymbolicPrompt};

use crate::error::ApiError;

const CORPUS_DIR: &str = "corpus";
const LIBRARY_DIR: &str = "library";
const AUDIT_LOG: &str = "render-audit.ndjson";

/// Where things live and which backends to call.
#[derive(Debug, Clone)]
pub struct Settings {
    pub data_dir: PathBuf,
    pub interpreter: InterpreterBackend,
    /// External render service, when configured.
    pub lmm: Option<LmmConfig>,
    /// Replacement lexicon and template registries.
    pub registries: Option<(PathBuf, PathBuf)>,
}

impl Settings {
    /// Local backends only.
    pub fn local(data_dir: impl Into<PathBuf>) -> Settings {
        Settings {
            data_dir: data_dir.into(),
            interpreter: InterpreterBackend::LexiconFallback,
            lmm: None,
            registries: None,
        }
    }

    /// Backends from `MUSICSCAFFOLD_LLM_*` and `MUSICSCAFFOLD_LMM_*`.
    pub fn from_env(data_dir: impl Into<PathBuf>) -> Settings {
        Settings {
            interpreter: InterpreterBackend::from_env(),
            lmm: LmmConfig::from_env(),
            ..Settings::local(data_dir)
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.data_dir.join(CORPUS_DIR)
    }

    pub fn library_dir(&self) -> PathBuf {
        self.data_dir.join(LIBRARY_DIR)
    }

    pub fn audit_log(&self) -> PathBuf {
        self.data_dir.join(AUDIT_LOG)
    }

    pub fn render_backend(&self) -> RenderBackend {
        match &self.lmm {
            Some(config) => RenderBackend::ExternalLmm(config.clone()),
            None => RenderBackend::LocalSynth,
        }
    }
}

/// Everything a request handler or CLI command needs.
#[derive(Debug)]
pub struct App {
    pub settings: Settings,
    pub interpreter: Interpreter,
    pub refiner: Refiner,
    pub library: Library,
    pub renderer: Renderer,
    corpus: RwLock<SegmentDatabase>,
}

/// Outcome of one headless pass through the whole loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub session_id: String,
    pub interpreter: BackendKind,
    pub fallback_used: bool,
    pub plan: AttributeSet,
    pub sketch: SymbolicPrompt,
    pub output_ref: String,
    pub report: AlignmentReport,
}

fn read_corpus(dir: &Path) -> Result<SegmentDatabase, ApiError> {
    if !dir.join("manifest.json").exists() && !dir.join("segments").exists() {
        return Ok(SegmentDatabase::new());
    }
    Ok(load_corpus(dir)?)
}

impl App {
    pub fn open(settings: Settings) -> Result<App, ApiError> {
        std::fs::create_dir_all(&settings.data_dir).map_err(|e| ApiError::storage(e.to_string()))?;
        let interpreter = match &settings.registries {
            Some((lexicon, templates)) => Interpreter::from_files(lexicon, templates)
                .map_err(|e| ApiError::storage(e.to_string()))?,
            None => Interpreter::default(),
        };
        let library = Library::open(settings.library_dir())?;
        let renderer = Renderer::new(library.blobs().clone(), settings.audit_log());
        let corpus = read_corpus(&settings.corpus_dir())?;
        Ok(App {
            settings,
            interpreter,
            refiner: Refiner::default(),
            library,
            renderer,
            corpus: RwLock::new(corpus),
        })
    }

    pub fn corpus_len(&self) -> usize {
        self.corpus.read().expect("corpus lock").len()
    }

    /// Re-reads the corpus directory, picking up newly ingested segments.
    pub fn reload_corpus(&self) -> Result<usize, ApiError> {
        let fresh = read_corpus(&self.settings.corpus_dir())?;
        let len = fresh.len();
        *self.corpus.write().expect("corpus lock") = fresh;
        Ok(len)
    }

    /// Adds segments to the corpus and writes it back to disk. Nothing is
    /// written unless every segment is accepted. With `skip_existing`, ids
    /// already in the corpus are left alone instead of rejected.
    pub fn add_segments(
        &self,
        records: impl IntoIterator<Item = SegmentRecord>,
        skip_existing: bool,
    ) -> Result<usize, ApiError> {
        let mut corpus = self.corpus.write().expect("corpus lock");
        let mut next = corpus.clone();
        let mut added = 0;
        for record in records {
            if skip_existing && next.get(&record.segment_id).is_some() {
                continue;
            }
            next.insert(record)?;
            added += 1;
        }
        save_corpus(&next, &self.settings.corpus_dir())?;
        *corpus = next;
        Ok(added)
    }

    /// Ingests a corpus directory (`segments/<id>.mid` + `<id>.json`,
    /// optional `manifest.json`).
    pub fn ingest(&self, dir: &Path) -> Result<usize, ApiError> {
        self.add_segments(read_corpus_dir(dir)?, false)
    }

    /// Adds the built-in starter corpus, keeping any segment already present.
    pub fn seed_corpus(&self) -> Result<usize, ApiError> {
        self.add_segments(musicscaffold_core::seed::seed_corpus(), true)
    }

    /// Retrieves the best segment for `plan` and refines it.
    pub fn sketch(&self, plan: &AttributeSet) -> Result<SymbolicPrompt, ApiError> {
        let violations = plan.validate();
        if !violations.is_empty() {
            return Err(ApiError::invalid_plan(violations));
        }
        let corpus = self.corpus.read().expect("corpus lock");
        let segment = corpus.retrieve(plan)?;
        Ok(self.refiner.refine(segment, plan)?)
    }

    /// text → plan → sketch → render → saved session.
    pub async fn run(&self, text: &str, local: bool, parent: Option<String>) -> Result<RunReport, ApiError> {
        let (interpreter, render) = if local {
            (InterpreterBackend::LexiconFallback, RenderBackend::LocalSynth)
        } else {
            (self.settings.interpreter.clone(), self.settings.render_backend())
        };
        let interpretation = self.interpreter.interpret_with_fallback(text, &interpreter).await?;
        let plan = interpretation.plan;
        let sketch = self.sketch(&plan)?;
        let result = self.renderer.render(&sketch, &plan, &render).await?;

        let mut entry = SessionEntry::new(plan.clone());
        entry.intent_text = text.to_string();
        entry.parent_session = parent;
        entry.sketches.push(sketch.clone());
        entry.results.push(result.clone());
        self.library.save_session(&entry)?;
        Ok(RunReport {
            session_id: entry.session_id,
            interpreter: interpretation.backend,
            fallback_used: interpretation.fallback_used,
            plan,
            sketch,
            output_ref: result.output_ref,
            report: result.report,
        })
    }
}
