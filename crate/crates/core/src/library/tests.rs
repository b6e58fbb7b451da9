use std::io::Read;

use super::*;
use crate::interpret::interpret_local;
use crate::model::{AttributeId, AttributeValue, Key, Tempo};
use crate::render::Renderer;
use crate::seed::{tonal_phrase, PhraseSpec};

fn open(dir: &Path) -> Library {
    Library::open(dir).unwrap()
}

fn sketch(key: Key, bpm: u16) -> SymbolicPrompt {
    let mut spec = PhraseSpec::new(key);
    spec.bpm = bpm;
    tonal_phrase(&spec)
}

/// A session with one sketch and one local render.
fn rendered(library: &Library, text: &str, key: Key, bpm: u16) -> SessionEntry {
    let plan = interpret_local(text).unwrap();
    let s = sketch(key, bpm);
    let renderer = Renderer::new(library.blobs().clone(), library.db_path.with_extension("audit"));
    let result = renderer.render_local(&s, &plan).unwrap();
    let mut entry = SessionEntry::new(plan);
    entry.sketches.push(s);
    entry.results.push(result);
    entry
}

#[test]
fn save_then_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    let entry = rendered(&library, "happy song", Key::C_MAJOR, 132);
    assert_eq!(library.save_session(&entry).unwrap(), entry.session_id);
    assert_eq!(library.load_session(&entry.session_id).unwrap(), entry);
    // Saving the same entry again changes nothing.
    library.save_session(&entry).unwrap();
    assert_eq!(library.load_session(&entry.session_id).unwrap(), entry);
    drop(library);
    assert_eq!(open(dir.path()).load_session(&entry.session_id).unwrap(), entry);
}

#[test]
fn history_is_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    let mut entry = rendered(&library, "calm folk", Key::C_MAJOR, 72);
    library.save_session(&entry).unwrap();
    let first = entry.sketches[0].clone();
    entry.sketches.push(sketch(Key::new(7, crate::model::Mode::Major), 80));
    library.save_session(&entry).unwrap();
    let loaded = library.load_session(&entry.session_id).unwrap();
    assert_eq!(loaded.sketches.len(), 2);
    assert_eq!(loaded.sketches[0], first);

    let mut rewritten = loaded.clone();
    rewritten.sketches[0] = sketch(Key::A_MINOR, 90);
    assert!(matches!(
        library.save_session(&rewritten),
        Err(LibraryError::HistoryConflict { .. })
    ));
    let mut truncated = loaded.clone();
    truncated.sketches.pop();
    assert!(matches!(
        library.save_session(&truncated),
        Err(LibraryError::HistoryConflict { .. })
    ));
    let mut edited = loaded.clone();
    edited.plan.get_mut(AttributeId::Tempo).unwrap().value = AttributeValue::Tempo(Tempo::new(60).unwrap());
    assert!(matches!(
        library.save_session(&edited),
        Err(LibraryError::HistoryConflict { .. })
    ));
    assert_eq!(library.load_session(&entry.session_id).unwrap(), loaded);
}


#[test]
fn lineage_must_point_at_stored_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    let orphan = SessionEntry::new(interpret_local("sad").unwrap()).revision_of("nope");
    assert!(matches!(library.save_session(&orphan), Err(LibraryError::UnknownSession(_))));
    let mut own = SessionEntry::new(interpret_local("sad").unwrap());
    own.parent_session = Some(own.session_id.clone());
    assert!(matches!(library.save_session(&own), Err(LibraryError::InvalidEntry(_))));
    let mut bad_plan = SessionEntry::new(interpret_local("sad").unwrap());
    bad_plan.plan.attributes[0].weight = -1.0;
    assert!(matches!(library.save_session(&bad_plan), Err(LibraryError::InvalidPlan(_))));
    assert!(library.list_sessions(&ListFilter::default()).unwrap().is_empty());
}

#[test]
fn listing_is_newest_first_and_follows_lineage() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    assert!(library.list_sessions(&ListFilter::default()).unwrap().is_empty());
    let root = rendered(&library, "happy song", Key::C_MAJOR, 132);
    library.save_session(&root).unwrap();
    let revision = SessionEntry::new(interpret_local("sad song in a minor key").unwrap()).revision_of(&root.session_id);
    library.save_session(&revision).unwrap();
    let other = SessionEntry::new(interpret_local("rock anthem").unwrap());
    library.save_session(&other).unwrap();

    let all = library.list_sessions(&ListFilter::default()).unwrap();
    let ids: Vec<&str> = all.iter().map(|s| s.session_id.as_str()).collect();
    assert_eq!(ids, vec![other.session_id.as_str(), revision.session_id.as_str(), root.session_id.as_str()]);
    assert_eq!(all[2].overall_match, Some(true));
    assert_eq!(all[1].overall_match, None);

    let chain = library
        .list_sessions(&ListFilter {
            lineage_root: Some(root.session_id.clone()),
            ..ListFilter::default()
        })
        .unwrap();
    assert_eq!(chain.len(), 2);
    assert_eq!(chain[0].parent_session.as_deref(), Some(root.session_id.as_str()));
    assert_eq!(chain[1].parent_session, None);

    let later = library
        .list_sessions(&ListFilter {
            since: Some(other.created_at),
            ..ListFilter::default()
        })
        .unwrap();
    assert_eq!(later.len(), 1);
    assert!(matches!(
        library.list_sessions(&ListFilter {
            lineage_root: Some("missing".into()),
            ..ListFilter::default()
        }),
        Err(LibraryError::UnknownSession(_))
    ));
}

#[test]
fn diff_links_plan_and_alignment_changes() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    let a = rendered(&library, "happy song in C major", Key::C_MAJOR, 132);
    let mut b_plan = a.plan.clone();
    b_plan.get_mut(AttributeId::Key).unwrap().value = AttributeValue::Key(Key::A_MINOR);
    let s = sketch(Key::A_MINOR, 132);
    let renderer = Renderer::new(library.blobs().clone(), dir.path().join("audit"));
    let mut b = SessionEntry::new(b_plan.clone()).revision_of(&a.session_id);
    b.results.push(renderer.render_local(&s, &b_plan).unwrap());
    b.sketches.push(s.clone());
    b.sketches[0] = b.sketches[0].with_provenance(a.sketches[0].provenance().clone());
    library.save_session(&a).unwrap();
    library.save_session(&b).unwrap();

    let d = library.diff_sessions(&a.session_id, &b.session_id).unwrap();
    assert_eq!(d.plan.len(), 1);
    assert_eq!(d.plan[0].id, AttributeId::Key);
    assert_eq!(d.plan[0].before, Some("C major".into()));
    assert_eq!(d.plan[0].after, Some("A minor".into()));
    assert_eq!(d.alignment.len(), 1);
    assert_eq!(d.alignment[0].id, AttributeId::Key);
    assert_eq!(d.alignment[0].after.as_ref().unwrap().detected.as_deref(), Some("A minor"));

    let back = library.diff_sessions(&b.session_id, &a.session_id).unwrap();
    assert_eq!(back.plan[0].before, d.plan[0].after);
    assert_eq!(back.alignment[0].before, d.alignment[0].after);

    assert!(library.diff_sessions(&a.session_id, &a.session_id).unwrap().is_empty());
    assert!(matches!(
        library.diff_sessions(&a.session_id, "nope"),
        Err(LibraryError::UnknownSession(_))
    ));
}

#[test]
fn export_contains_plan_midi_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    let entry = rendered(&library, "sad feeling in minor key, with slow tempo and soft piano", Key::A_MINOR, 72);
    library.save_session(&entry).unwrap();
    let bytes = library.export_session(&entry.session_id).unwrap();
    assert_eq!(bytes, library.export_session(&entry.session_id).unwrap());
    let mut zip = zip::ZipArchive::new(std::io::Cursor::new(bytes)).unwrap();
    let mut names: Vec<String> = zip.file_names().map(str::to_string).collect();
    names.sort();
    assert_eq!(
        names,
        vec![
            "plan.json",
            "reports/report-01.json",
            "results/result-01.mid",
            "session.json",
            "sketches/sketch-01.mid",
        ]
    );
    let mut plan = String::new();
    zip.by_name("plan.json").unwrap().read_to_string(&mut plan).unwrap();
    assert_eq!(serde_json::from_str::<AttributeSet>(&plan).unwrap(), entry.plan);
    let mut midi = Vec::new();
    zip.by_name("sketches/sketch-01.mid").unwrap().read_to_end(&mut midi).unwrap();
    assert_eq!(midi, emit_midi(&entry.sketches[0]));
    assert_eq!(library.sketch_midi(&entry.session_id, 0).unwrap(), midi);
    assert!(matches!(library.export_session("nope"), Err(LibraryError::UnknownSession(_))));
}

#[test]
fn repair_scan_finds_strays() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    let entry = rendered(&library, "happy", Key::C_MAJOR, 132);
    library.save_session(&entry).unwrap();
    assert!(library.repair_scan().unwrap().is_clean());

    let (stray, _) = library.blobs().put(b"unsaved render", "wav").unwrap();
    let lost = library.load_session(&entry.session_id).unwrap().results[0].output_ref.clone();
    let report = library.repair_scan().unwrap();
    assert_eq!(report.unreferenced, vec![stray.clone()]);
    library.repair().unwrap();
    assert!(library.repair_scan().unwrap().is_clean());

    library.blobs().remove(&lost).unwrap();
    assert_eq!(library.repair_scan().unwrap().missing, vec![lost]);
}

#[test]
fn results_must_reference_stored_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let library = open(dir.path());
    let mut entry = rendered(&library, "happy", Key::C_MAJOR, 132);
    library.blobs().remove(&entry.results[0].output_ref).unwrap();
    assert!(matches!(library.save_session(&entry), Err(LibraryError::InvalidEntry(_))));
    entry.results.clear();
    library.save_session(&entry).unwrap();
}

/// Everything observable about a library, for before/after comparison.
fn snapshot(library: &Library) -> (Vec<SessionEntry>, Vec<String>) {
    let mut sessions: Vec<SessionEntry> = library
        .list_sessions(&ListFilter::default())
        .unwrap()
        .iter()
        .map(|s| library.load_session(&s.session_id).unwrap())
        .collect();
    sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    (sessions, library.blobs().list().unwrap())
}

#[test]
fn injected_faults_leave_prior_state_intact() {
    let dir = tempfile::tempdir().unwrap();
    let faults = Arc::new(FaultInjector::default());
    let library = Library::open_with_faults(dir.path(), faults.clone()).unwrap();
    let base = rendered(&library, "happy song", Key::C_MAJOR, 132);
    library.save_session(&base).unwrap();

    for i in 0..30u16 {
        let before = snapshot(&library);
        // Alternate between a new session and appending to an old one.
        let mut entry = if i % 2 == 0 {
            SessionEntry::new(interpret_local("sad song").unwrap()).revision_of(&base.session_id)
        } else {
            library.load_session(&base.session_id).unwrap()
        };
        entry.sketches.push(sketch(Key::A_MINOR, 60 + i));
        entry.sketches.push(sketch(Key::new(2, crate::model::Mode::Minor), 60 + i));
        // Five guarded steps: two blob writes, two sketch inserts, commit.
        faults.fail_after(u64::from(i % 5));
        let err = library.save_session(&entry).unwrap_err();
        assert!(matches!(err, LibraryError::StorageFailure(ref m) if m.contains("injected")), "{err}");
        assert!(!faults.is_armed());
        assert_eq!(snapshot(&library), before);
        assert!(library.repair_scan().unwrap().missing.is_empty());
        library.save_session(&entry).unwrap();
    }
    drop(library);
    let reopened = Library::open(dir.path()).unwrap();
    assert_eq!(reopened.list_sessions(&ListFilter::default()).unwrap().len(), 16);
}

#[test]
fn concurrent_saves_of_different_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let library = Arc::new(open(dir.path()));
    let handles: Vec<_> = (0..8u16)
        .map(|i| {
            let library = library.clone();
            std::thread::spawn(move || {
                let mut entry = SessionEntry::new(interpret_local("calm ambient").unwrap());
                entry.sketches.push(sketch(Key::C_MAJOR, 60 + i));
                library.save_session(&entry).unwrap();
                assert_eq!(library.load_session(&entry.session_id).unwrap(), entry);
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(library.list_sessions(&ListFilter::default()).unwrap().len(), 8);
    assert!(library.repair_scan().unwrap().is_clean());
}
