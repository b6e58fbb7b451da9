use proptest::prelude::*;
use serde_json::json;

use super::*;
use crate::midi::emit_midi;
use crate::model::{Attribute, Key, Meter, Mood, NoteEvent, SymbolicPrompt, Tempo};

fn plan(values: &[(AttributeValue, f64)]) -> AttributeSet {
    AttributeSet::new(
        "t",
        values
            .iter()
            .map(|(v, w)| Attribute::new(*v, "x").with_weight(*w).unwrap())
            .collect(),
    )
}

fn content() -> SymbolicPrompt {
    let bars = (0..4)
        .map(|b| vec![NoteEvent::new(60 + b as u8, 0, 1920, 90)])
        .collect();
    SymbolicPrompt::new(120, Key::C_MAJOR, Meter::FourFour, bars, Provenance::default()).unwrap()
}

fn record(id: &str, tags: Tags) -> SegmentRecord {
    SegmentRecord {
        segment_id: id.into(),
        content: content(),
        tags,
    }
}

fn naive_retrieve<'a>(records: &'a [SegmentRecord], plan: &AttributeSet) -> Option<&'a SegmentRecord> {
    let mut sorted: Vec<&SegmentRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    let mut best: Option<(&SegmentRecord, f64)> = None;
    for r in sorted {
        let s: f64 = plan
            .attributes
            .iter()
            .map(|a| {
                let hit = r.tags.iter().any(|t| t.id() == a.id() && t.match_key() == a.value.match_key());
                if hit {
                    a.weight
                } else {
                    0.0
                }
            })
            .sum();
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((r, s));
        }
    }
    best.map(|(r, _)| r)
}

#[test]
fn score_sums_matching_weights() {
    let p = plan(&[
        (AttributeValue::Key(Key::C_MAJOR), 1.0),
        (AttributeValue::Mood(Mood::Happy), 0.5),
    ]);
    let r = record(
        "r",
        Tags::new()
            .with(AttributeValue::Key(Key::C_MAJOR))
            .with(AttributeValue::Mood(Mood::Sad)),
    );
    assert_eq!(score(&p, &r), 1.0);
    assert_eq!(score(&p, &record("e", Tags::new())), 0.0);
    let exact = record(
        "x",
        Tags::new()
            .with(AttributeValue::Key(Key::C_MAJOR))
            .with(AttributeValue::Mood(Mood::Happy)),
    );
    assert_eq!(score(&p, &exact), p.total_weight());
}

#[test]
fn tempo_matches_by_bucket() {
    let p = plan(&[(AttributeValue::Tempo(Tempo::new(70).unwrap()), 1.0)]);
    let r = record("r", Tags::new().with(AttributeValue::Tempo(Tempo::new(85).unwrap())));
    assert_eq!(score(&p, &r), 1.0);
    let r = record("r", Tags::new().with(AttributeValue::Tempo(Tempo::new(95).unwrap())));
    assert_eq!(score(&p, &r), 0.0);
}

#[test]
fn ties_go_to_the_smallest_id() {
    let key = AttributeValue::Key(Key::C_MAJOR);
    let mood = AttributeValue::Mood(Mood::Happy);
    let p = plan(&[(key, 1.0), (mood, 0.5)]);
    let db = SegmentDatabase::from_records([
        record("c", Tags::new().with(mood)),
        record("a", Tags::new().with(key).with(mood)),
        record("b", Tags::new().with(key).with(mood)),
    ])
    .unwrap();
    assert_eq!(db.retrieve(&p).unwrap().segment_id, "a");
}

#[test]
fn singleton_and_empty_databases() {
    let p = plan(&[(AttributeValue::Mood(Mood::Happy), 0.5)]);
    let db = SegmentDatabase::from_records([record("only", Tags::new())]).unwrap();
    assert_eq!(db.retrieve(&p).unwrap().segment_id, "only");
    assert!(matches!(SegmentDatabase::new().retrieve(&p), Err(StoreError::EmptyDatabase)));
}

#[test]
fn ingest_stores_bars_and_tags() {
    let mut db = SegmentDatabase::new();
    let bytes = emit_midi(&content());
    let tags = json!({"key": "C major", "genre": "pop"});
    let stored = db.ingest("clip", &bytes, tags.as_object().unwrap()).unwrap();
    assert_eq!(stored.content.bars().len(), 4);
    assert_eq!(stored.tags.to_json(), *tags.as_object().unwrap());
    assert_eq!(db.rebuilt_index(), *db.index());
}

#[test]
fn ingest_rejects_bad_input() {
    let mut db = SegmentDatabase::new();
    let ok_tags = json!({"genre": "pop"});
    assert!(matches!(
        db.ingest("a", &[], ok_tags.as_object().unwrap()),
        Err(StoreError::MidiParse(_))
    ));
    let bad = json!({"key": "H sharp"});
    assert!(matches!(
        db.ingest("a", &emit_midi(&content()), bad.as_object().unwrap()),
        Err(StoreError::IllegalTag(_))
    ));
    let unknown = json!({"loudness": "loud"});
    assert!(matches!(
        db.ingest("a", &emit_midi(&content()), unknown.as_object().unwrap()),
        Err(StoreError::IllegalTag(_))
    ));
    db.ingest("a", &emit_midi(&content()), ok_tags.as_object().unwrap()).unwrap();
    assert!(matches!(
        db.ingest("a", &emit_midi(&content()), ok_tags.as_object().unwrap()),
        Err(StoreError::DuplicateSegment(_))
    ));
    assert!(matches!(
        db.ingest("../x", &emit_midi(&content()), ok_tags.as_object().unwrap()),
        Err(StoreError::InvalidId(_))
    ));
}

#[test]
fn corpus_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let db = SegmentDatabase::from_records(crate::seed::seed_corpus()).unwrap();
    let manifest = save_corpus(&db, dir.path()).unwrap();
    assert_eq!(manifest.segments.len(), 20);
    let loaded = load_corpus(dir.path()).unwrap();
    assert_eq!(loaded.len(), db.len());
    for (a, b) in db.records().zip(loaded.records()) {
        assert_eq!(a.segment_id, b.segment_id);
        assert_eq!(a.tags, b.tags);
        assert_eq!(a.content.without_provenance(), b.content.without_provenance());
    }
    assert_eq!(loaded.index(), db.index());

    std::fs::write(dir.path().join("segments/elegy-05.mid"), b"MThd").unwrap();
    let err = load_corpus(dir.path()).unwrap_err();
    assert!(err.to_string().contains("does not match manifest"), "{err}");
}

#[test]
fn corpus_without_manifest_reads_every_segment() {
    let dir = tempfile::tempdir().unwrap();
    let db = SegmentDatabase::from_records(crate::seed::seed_corpus().into_iter().take(3)).unwrap();
    save_corpus(&db, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("manifest.json")).unwrap();
    assert_eq!(load_corpus(dir.path()).unwrap().len(), 3);
}

fn arb_value() -> impl Strategy<Value = AttributeValue> {
    prop::sample::select(AttributeId::ALL.to_vec()).prop_flat_map(|id| prop::sample::select(id.domain()))
}

fn arb_tags() -> impl Strategy<Value = Tags> {
    prop::collection::vec(arb_value(), 0..9).prop_map(|v| v.into_iter().collect())
}

fn arb_records() -> impl Strategy<Value = Vec<SegmentRecord>> {
    prop::collection::btree_map("[a-z]{1,4}", arb_tags(), 1..100)
        .prop_map(|m| m.into_iter().map(|(id, tags)| record(&id, tags)).collect())
}

fn arb_plan() -> impl Strategy<Value = AttributeSet> {
    prop::sample::subsequence(AttributeId::ALL.to_vec(), 0..=9)
        .prop_flat_map(|ids| {
            ids.into_iter()
                .map(|id| (prop::sample::select(id.domain()), 0.0f64..=1.0))
                .collect::<Vec<_>>()
        })
        .prop_map(|v| plan(&v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn retrieve_equals_naive_scan(records in arb_records(), p in arb_plan()) {
        let db = SegmentDatabase::from_records(records.clone()).unwrap();
        let got = db.retrieve(&p).unwrap();
        let want = naive_retrieve(&records, &p).unwrap();
        prop_assert_eq!(&got.segment_id, &want.segment_id);
    }

    #[test]
    fn score_is_bounded_and_monotone(tags in arb_tags(), extra in arb_value(), p in arb_plan()) {
        let r = record("r", tags.clone());
        let s = score(&p, &r);
        prop_assert!(s >= 0.0 && s <= p.total_weight() + 1e-12);
        // Adding a tag that matches the plan never lowers the score.
        if let Some(a) = p.attributes.iter().find(|a| a.id() == extra.id()) {
            let mut more = tags.clone();
            more.insert(a.value);
            prop_assert!(score(&p, &record("r", more)) >= s);
        }
    }

    #[test]
    fn index_is_coherent_and_order_free(records in arb_records(), p in arb_plan(), seed in any::<u64>()) {
        let db = SegmentDatabase::from_records(records.clone()).unwrap();
        prop_assert_eq!(db.rebuilt_index(), db.index().clone());
        let mut shuffled = records;
        let len = shuffled.len();
        for i in 0..len {
            let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % len as u64) as usize;
            shuffled.swap(i, j);
        }
        let other = SegmentDatabase::from_records(shuffled).unwrap();
        prop_assert_eq!(other.index(), db.index());
        prop_assert_eq!(&other.retrieve(&p).unwrap().segment_id, &db.retrieve(&p).unwrap().segment_id);
    }
}
