use proptest::prelude::*;

use super::analysis::{detect_chord_numerals, detect_density, detect_rhythm_pattern};
use super::rules::{RuleContext, RuleError, RuleOutcome, SHAPE_VELOCITY};
use super::*;
use crate::model::{
    Attribute, AttributeId, AttributeValue, Bar, ChordProgression, Density, Key, Meter, Mode, Mood, NoteEvent,
    RhythmPattern, Tempo,
};
use crate::seed::{tonal_phrase, PhraseSpec};

fn plan(values: &[AttributeValue]) -> AttributeSet {
    AttributeSet::new(
        "test",
        values.iter().map(|v| Attribute::new(*v, "because")).collect(),
    )
}

fn segment(content: SymbolicPrompt, tags: Tags) -> SegmentRecord {
    SegmentRecord {
        segment_id: "seg".into(),
        content,
        tags,
    }
}

fn c_major_fixture() -> SymbolicPrompt {
    let mut spec = PhraseSpec::new(Key::C_MAJOR);
    spec.bars = 2;
    spec.bpm = 120;
    tonal_phrase(&spec)
}

fn key(tonic: u8, mode: Mode) -> AttributeValue {
    AttributeValue::Key(Key::new(tonic, mode))
}

fn tempo(bpm: u16) -> AttributeValue {
    AttributeValue::Tempo(Tempo::new(bpm).unwrap())
}

#[test]
fn transposes_c_major_to_d_major_by_two() {
    let src = c_major_fixture();
    let out = refine(&segment(src.clone(), Tags::new()), &plan(&[key(2, Mode::Major)])).unwrap();
    assert_eq!(out.key(), Key::new(2, Mode::Major));
    for (a, b) in src.bars().iter().flatten().zip(out.bars().iter().flatten()) {
        assert_eq!(b.pitch, a.pitch + 2);
        assert_eq!((a.position, a.length, a.velocity), (b.position, b.length, b.velocity));
    }
    assert_eq!(out.provenance().rules, vec!["transpose_key"]);
    assert_eq!(out.provenance().segment_id.as_deref(), Some("seg"));
}

#[test]
fn transposition_takes_the_short_way_down() {
    let out = refine(&segment(c_major_fixture(), Tags::new()), &plan(&[key(9, Mode::Major)])).unwrap();
    let first_in = c_major_fixture().bars()[0][0].pitch;
    assert_eq!(out.bars()[0][0].pitch, first_in - 3);
}

#[test]
fn tempo_rule_only_touches_the_header() {
    let src = c_major_fixture();
    let out = refine(&segment(src.clone(), Tags::new()), &plan(&[tempo(80)])).unwrap();
    assert_eq!(out.tempo_bpm(), 80);
    assert_eq!(out.bars(), src.bars());
    assert_eq!(out.key(), src.key());
}

#[test]
fn parallel_minor_lowers_degrees_three_six_seven() {
    let src = c_major_fixture();
    let out = refine(&segment(src.clone(), Tags::new()), &plan(&[key(0, Mode::Minor)])).unwrap();
    assert_eq!(out.key(), Key::new(0, Mode::Minor));
    // Oracle: look up each note's scale degree in C major and lower the
    // 3rd, 6th and 7th degrees.
    let c_major = [0u8, 2, 4, 5, 7, 9, 11];
    let expected: Vec<u8> = src
        .bars()
        .iter()
        .flatten()
        .map(|n| match c_major.iter().position(|&pc| pc == n.pitch % 12) {
            Some(2 | 5 | 6) => n.pitch - 1,
            _ => n.pitch,
        })
        .collect();
    let mut got: Vec<u8> = out.bars().iter().flatten().map(|n| n.pitch).collect();
    let mut expected = expected;
    got.sort_unstable();
    expected.sort_unstable();
    assert_eq!(got, expected);
}

#[test]
fn sad_mood_scales_velocities_by_three_quarters() {
    let bars: Vec<Bar> = vec![vec![
        NoteEvent::new(60, 0, 480, 100),
        NoteEvent::new(62, 480, 480, 1),
        NoteEvent::new(64, 960, 480, 127),
        NoteEvent::new(65, 1440, 480, 3),
    ]];
    let src = SymbolicPrompt::new(100, Key::C_MAJOR, Meter::FourFour, bars, Provenance::default()).unwrap();
    let out = refine(&segment(src.clone(), Tags::new()), &plan(&[AttributeValue::Mood(Mood::Sad)])).unwrap();
    let expected: Vec<u8> = src
        .bars()
        .iter()
        .flatten()
        .map(|n| ((f64::from(n.velocity) * 0.75).round() as u8).max(1))
        .collect();
    let got: Vec<u8> = out.bars().iter().flatten().map(|n| n.velocity).collect();
    assert_eq!(got, expected);
    assert_eq!(got, vec![75, 1, 95, 2]);
    assert!(out.provenance().rules.contains(&SHAPE_VELOCITY.to_string()));
}

#[test]
fn mood_matching_the_segment_tag_keeps_velocities() {
    let src = c_major_fixture();
    let tags = Tags::new().with(AttributeValue::Mood(Mood::Sad));
    let out = refine(&segment(src.clone(), tags), &plan(&[AttributeValue::Mood(Mood::Sad)])).unwrap();
    assert_eq!(out.bars(), src.bars());
}

#[test]
fn key_then_tempo_equals_tempo_then_key() {
    let src = segment(c_major_fixture(), Tags::new());
    let k = plan(&[key(7, Mode::Major)]);
    let t = plan(&[tempo(150)]);
    let a = refine(&segment(refine(&src, &k).unwrap(), Tags::new()), &t).unwrap();
    let b = refine(&segment(refine(&src, &t).unwrap(), Tags::new()), &k).unwrap();
    assert_eq!(a.without_provenance(), b.without_provenance());
}

#[test]
fn every_target_key_is_detected_after_refinement() {
    for source in [Key::C_MAJOR, Key::A_MINOR, Key::new(6, Mode::Major)] {
        let seg = segment(tonal_phrase(&PhraseSpec::new(source)), Tags::new());
        for target in Key::all() {
            let out = refine(&seg, &plan(&[AttributeValue::Key(target)])).unwrap();
            assert_eq!(out.key(), target);
            assert_eq!(detect_key(&out).unwrap(), target, "{source} -> {target}");
        }
    }
}

#[test]
fn swing_and_staccato_are_detectable() {
    let seg = segment(c_major_fixture(), Tags::new());
    let swung = refine(&seg, &plan(&[AttributeValue::RhythmPattern(RhythmPattern::Swing)])).unwrap();
    assert_eq!(detect_rhythm_pattern(&swung), RhythmPattern::Swing);
    let back = refine(
        &segment(swung.clone(), Tags::new()),
        &plan(&[AttributeValue::RhythmPattern(RhythmPattern::Straight)]),
    )
    .unwrap();
    assert_eq!(back.bars(), c_major_fixture().bars());
    let short = refine(&seg, &plan(&[AttributeValue::RhythmPattern(RhythmPattern::Staccato)])).unwrap();
    assert_eq!(detect_rhythm_pattern(&short), RhythmPattern::Staccato);
}

#[test]
fn density_moves_toward_the_target() {
    let seg = segment(c_major_fixture(), Tags::new());
    assert_eq!(detect_density(&seg.content), Density::Medium);
    let dense = refine(&seg, &plan(&[AttributeValue::Density(Density::Dense)])).unwrap();
    assert_eq!(detect_density(&dense), Density::Dense);

    let repeated: Bar = (0..8).map(|i| NoteEvent::new(60, i * 240, 240, 90)).collect();
    let src = SymbolicPrompt::new(100, Key::C_MAJOR, Meter::FourFour, vec![repeated], Provenance::default()).unwrap();
    let sparse = refine(&segment(src, Tags::new()), &plan(&[AttributeValue::Density(Density::Sparse)])).unwrap();
    assert_eq!(detect_density(&sparse), Density::Sparse);
    assert_eq!(sparse.note_count(), 1);
}

#[test]
fn chords_are_rerooted_to_the_requested_progression() {
    let tags = Tags::new().with(AttributeValue::ChordProgression(ChordProgression::OneFourFiveOne));
    let seg = segment(c_major_fixture(), tags);
    let target = ChordProgression::OneFiveSixFour;
    let out = refine(&seg, &plan(&[AttributeValue::ChordProgression(target)])).unwrap();
    let got: Vec<_> = detect_chord_numerals(&out, out.key())
        .into_iter()
        .map(|(_, n)| n.map(|n| n.symbol))
        .collect();
    assert_eq!(got, vec![Some("I"), Some("V")]);
    assert_eq!(out.provenance().rules, vec!["reroot_chords"]);
}

#[test]
fn untagged_segments_skip_chord_rerooting_with_a_note() {
    let src = c_major_fixture();
    let out = refine(
        &segment(src.clone(), Tags::new()),
        &plan(&[AttributeValue::ChordProgression(ChordProgression::TwoFiveOne)]),
    )
    .unwrap();
    assert_eq!(out.bars(), src.bars());
    assert!(out.provenance().rules.is_empty());
    assert!(out.provenance().notes.iter().any(|n| n.contains("reroot_chords skipped")));
}

#[test]
fn unknown_suggested_rules_fall_back_to_the_default_order() {
    let mut p = plan(&[AttributeValue::Mood(Mood::Happy)]);
    p.suggested_rules = vec!["rm_rf".into()];
    let out = refine(&segment(c_major_fixture(), Tags::new()), &p).unwrap();
    assert_eq!(out.provenance().rules, vec!["shape_velocity"]);
    assert!(out.provenance().notes.iter().any(|n| n.contains("unknown rule rm_rf")));
}

#[test]
fn suggested_rules_cannot_drop_global_rules() {
    let mut p = plan(&[key(2, Mode::Major), AttributeValue::Mood(Mood::Happy)]);
    p.suggested_rules = vec!["set_tempo".into()];
    let out = refine(&segment(c_major_fixture(), Tags::new()), &p).unwrap();
    assert_eq!(out.provenance().rules, vec!["transpose_key"]);
}

#[test]
fn failing_rules_report_name_and_bar() {
    fn broken(_: &SymbolicPrompt, _: &AttributeValue, _: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
        Err(RuleError {
            bar: Some(1),
            reason: "nope".into(),
        })
    }
    let refiner = Refiner::with_rules(vec![RefinementRule {
        name: "broken",
        applies_to: AttributeId::Genre,
        description: "always fails",
        transform: broken,
    }]);
    let err = refiner
        .refine(
            &segment(c_major_fixture(), Tags::new()),
            &plan(&[AttributeValue::Genre(crate::model::Genre::Jazz)]),
        )
        .unwrap_err();
    match err {
        RefineError::RuleFailure { rule, bar, .. } => {
            assert_eq!(rule, "broken");
            assert_eq!(bar, Some(1));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn empty_segments_and_bad_plans_are_errors() {
    let empty = SymbolicPrompt::new(100, Key::C_MAJOR, Meter::FourFour, vec![vec![]], Provenance::default()).unwrap();
    assert!(matches!(
        refine(&segment(empty, Tags::new()), &plan(&[tempo(90)])),
        Err(RefineError::EmptyPrompt)
    ));
    let dup = plan(&[tempo(90), tempo(100)]);
    assert!(matches!(
        refine(&segment(c_major_fixture(), Tags::new()), &dup),
        Err(RefineError::InvalidPlan(_))
    ));
}

fn arb_note(ticks_per_bar: u32) -> impl Strategy<Value = NoteEvent> {
    (0u8..=127, 0..ticks_per_bar, 1u8..=127).prop_flat_map(move |(pitch, position, velocity)| {
        (1..=ticks_per_bar - position).prop_map(move |length| NoteEvent::new(pitch, position, length, velocity))
    })
}

fn arb_prompt() -> impl Strategy<Value = SymbolicPrompt> {
    (
        prop::sample::select(Meter::ALL.to_vec()),
        40u16..=240,
        prop::sample::select(Key::all()),
    )
        .prop_flat_map(|(meter, bpm, key)| {
            let bar = prop::collection::vec(arb_note(meter.ticks_per_bar()), 0..12);
            prop::collection::vec(bar, 1..4).prop_map(move |bars| {
                let notes: Vec<_> = bars
                    .iter()
                    .enumerate()
                    .flat_map(|(t, bar)| {
                        let offset = t as u64 * u64::from(meter.ticks_per_bar());
                        bar.iter().map(move |n| crate::model::TimedNote {
                            start: offset + u64::from(n.position),
                            end: offset + u64::from(n.end()),
                            pitch: n.pitch,
                            velocity: n.velocity,
                        })
                    })
                    .collect();
                SymbolicPrompt::from_timed(bpm, key, meter, &notes, bars.len(), Provenance::default()).unwrap()
            })
        })
}

fn arb_value(id: AttributeId) -> impl Strategy<Value = AttributeValue> {
    prop::sample::select(id.domain())
}

fn arb_plan() -> impl Strategy<Value = AttributeSet> {
    prop::sample::subsequence(AttributeId::ALL.to_vec(), 0..=9)
        .prop_flat_map(|ids| ids.into_iter().map(arb_value).collect::<Vec<_>>())
        .prop_map(|values| plan(&values))
}

fn arb_tags() -> impl Strategy<Value = Tags> {
    prop::sample::subsequence(AttributeId::ALL.to_vec(), 0..=9)
        .prop_flat_map(|ids| ids.into_iter().map(arb_value).collect::<Vec<_>>())
        .prop_map(|values| values.into_iter().collect())
}

/// Whether every detectable plan attribute already holds for `prompt`.
fn conforms(prompt: &SymbolicPrompt, p: &AttributeSet) -> bool {
    p.attributes.iter().all(|a| match a.value {
        AttributeValue::Key(k) => prompt.key() == k,
        AttributeValue::Tempo(t) => prompt.tempo_bpm() == t.bpm,
        AttributeValue::Meter(m) => prompt.meter() == m,
        AttributeValue::RhythmPattern(r) => detect_rhythm_pattern(prompt) == r,
        AttributeValue::Density(d) => detect_density(prompt) == d,
        AttributeValue::ChordProgression(c) => {
            let numerals = c.numerals();
            detect_chord_numerals(prompt, prompt.key())
                .into_iter()
                .all(|(t, n)| n.map(|n| n.symbol) == Some(numerals[t % numerals.len()].symbol))
        }
        AttributeValue::Mood(_) | AttributeValue::Genre(_) | AttributeValue::Timbre(_) => true,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn refine_output_is_always_legal(content in arb_prompt(), tags in arb_tags(), p in arb_plan()) {
        match refine(&segment(content, tags), &p) {
            Ok(out) => {
                let rebuilt = SymbolicPrompt::new(
                    out.tempo_bpm(), out.key(), out.meter(), out.bars().to_vec(), out.provenance().clone(),
                );
                prop_assert!(matches!(rebuilt, Ok(ref r) if *r == out));
            }
            Err(RefineError::EmptyPrompt | RefineError::RuleFailure { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn conforming_output_is_a_fixed_point(content in arb_prompt(), tags in arb_tags(), p in arb_plan()) {
        let seg = segment(content, tags.clone());
        if let Ok(once) = refine(&seg, &p) {
            if conforms(&once, &p) {
                let twice = refine(&segment(once.clone(), tags), &p).unwrap();
                prop_assert_eq!(once.bars(), twice.bars());
                prop_assert_eq!(once.provenance().rules.clone(), twice.provenance().rules.clone());
            }
        }
    }

    #[test]
    fn a_plan_describing_the_prompt_changes_nothing(content in arb_prompt(), mood in arb_value(AttributeId::Mood)) {
        if content.note_count() == 0 {
            return Ok(());
        }
        let p = plan(&[
            AttributeValue::Key(content.key()),
            tempo(content.tempo_bpm()),
            AttributeValue::Meter(content.meter()),
            AttributeValue::RhythmPattern(detect_rhythm_pattern(&content)),
            AttributeValue::Density(detect_density(&content)),
            mood,
        ]);
        let tags = Tags::new().with(mood);
        let out = refine(&segment(content.clone(), tags), &p).unwrap();
        prop_assert_eq!(out.bars(), content.bars());
        prop_assert!(out.provenance().rules.is_empty());
    }

    #[test]
    fn tonal_material_refines_idempotently(index in 0usize..20, p in arb_plan()) {
        let seg = crate::seed::seed_corpus().swap_remove(index);
        let once = refine(&seg, &p).unwrap();
        let twice = refine(&SegmentRecord { content: once.clone(), ..seg }, &p).unwrap();
        prop_assert_eq!(once.bars(), twice.bars());
        prop_assert_eq!(once.provenance().rules.clone(), twice.provenance().rules.clone());
    }

    #[test]
    fn key_and_tempo_rules_commute(content in arb_prompt(), k in prop::sample::select(Key::all()), bpm in 40u16..=240) {
        let src = segment(content, Tags::new());
        let kp = plan(&[AttributeValue::Key(k)]);
        let tp = plan(&[tempo(bpm)]);
        if let (Ok(k1), Ok(t1)) = (refine(&src, &kp), refine(&src, &tp)) {
            let a = refine(&segment(k1, Tags::new()), &tp).unwrap();
            let b = refine(&segment(t1, Tags::new()), &kp).unwrap();
            prop_assert_eq!(a.without_provenance(), b.without_provenance());
        }
    }
}
