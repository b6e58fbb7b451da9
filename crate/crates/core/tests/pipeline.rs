//! The whole loop through the public API: corpus on disk, interpretation,
//! sketching, rendering, and a revision chain in the library.

use musicscaffold_core::interpret::{interpret_local, reflective_questions};
use musicscaffold_core::library::{Library, ListFilter};
use musicscaffold_core::refine::refine;
use musicscaffold_core::render::Renderer;
use musicscaffold_core::seed::seed_corpus;
use musicscaffold_core::store::{load_corpus, save_corpus, SegmentDatabase};
use musicscaffold_core::{AttributeClass, AttributeId, SessionEntry};

struct Loop {
    corpus: SegmentDatabase,
    library: Library,
    renderer: Renderer,
}

impl Loop {
    fn new(dir: &std::path::Path) -> Loop {
        save_corpus(&SegmentDatabase::from_records(seed_corpus()).unwrap(), &dir.join("corpus")).unwrap();
        let library = Library::open(dir.join("library")).unwrap();
        let renderer = Renderer::new(library.blobs().clone(), dir.join("audit.ndjson"));
        Loop {
            corpus: load_corpus(&dir.join("corpus")).unwrap(),
            library,
            renderer,
        }
    }

    fn session(&self, text: &str, parent: Option<&str>) -> SessionEntry {
        let plan = interpret_local(text).unwrap();
        let sketch = refine(self.corpus.retrieve(&plan).unwrap(), &plan).unwrap();
        let result = self.renderer.render_local(&sketch, &plan).unwrap();
        let mut entry = SessionEntry::new(plan);
        entry.parent_session = parent.map(str::to_string);
        entry.sketches.push(sketch);
        entry.results.push(result);
        self.library.save_session(&entry).unwrap();
        entry
    }
}

#[test]
fn revision_chain_is_comparable() {
    let dir = tempfile::tempdir().unwrap();
    let lp = Loop::new(dir.path());
    let first = lp.session("happy song", None);
    let second = lp.session("sad feeling in minor key, with slow tempo and soft piano", Some(&first.session_id));
    let third = lp.session(
        "A jazz ballad with melancholic; a minor key; slow tempo with a swing rhythm",
        Some(&second.session_id),
    );

    for entry in [&first, &second, &third] {
        let report = &entry.results[0].report;
        assert!(report.overall_match, "{}", entry.intent_text);
        for e in report.per_attribute.iter().filter(|e| e.class == AttributeClass::Global) {
            assert!(e.matched && e.verifiable, "{e:?}");
        }
    }

    let chain = lp
        .library
        .list_sessions(&ListFilter {
            lineage_root: Some(first.session_id.clone()),
            ..ListFilter::default()
        })
        .unwrap();
    let ids: Vec<&str> = chain.iter().map(|s| s.session_id.as_str()).collect();
    assert_eq!(ids, vec![third.session_id.as_str(), second.session_id.as_str(), first.session_id.as_str()]);

    let diff = lp.library.diff_sessions(&first.session_id, &second.session_id).unwrap();
    let changed: Vec<AttributeId> = diff.plan.iter().map(|d| d.id).collect();
    assert!(changed.contains(&AttributeId::Mood));
    assert!(changed.contains(&AttributeId::Key));
    assert!(changed.contains(&AttributeId::Tempo));
    let key = diff.alignment.iter().find(|d| d.id == AttributeId::Key).unwrap();
    assert_eq!(key.before.as_ref().unwrap().detected.as_deref(), Some("C major"));
    assert_eq!(key.after.as_ref().unwrap().detected.as_deref(), Some("A minor"));

    // One question per changed attribute.
    let questions = reflective_questions(&first.plan, &second.plan);
    assert_eq!(questions.len(), diff.plan.len());
}

#[test]
fn sketches_come_from_the_best_segment() {
    let dir = tempfile::tempdir().unwrap();
    let lp = Loop::new(dir.path());
    let entry = lp.session("A jazz ballad with melancholic; a minor key; slow tempo with a swing rhythm", None);
    let provenance = entry.sketches[0].provenance();
    let segment = lp.corpus.get(provenance.segment_id.as_deref().unwrap()).unwrap();
    let best = musicscaffold_core::store::score(&entry.plan, segment);
    for other in lp.corpus.records() {
        assert!(musicscaffold_core::store::score(&entry.plan, other) <= best);
    }
    assert_eq!(&provenance.segment_tags, &segment.tags);
    assert_eq!(
        lp.library.sketch_midi(&entry.session_id, 0).unwrap(),
        musicscaffold_core::midi::emit_midi(&entry.sketches[0])
    );
}
