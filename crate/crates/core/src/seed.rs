//! Generated tonal material: phrase builder used by fixtures and the
//! starter corpus shipped through `musicscaffold seed-corpus`.

use crate::model::vocab::ChordQuality;
use crate::model::{
    AttributeValue, ChordProgression, Density, Genre, Key, Meter, Mode, Mood, Provenance, RhythmPattern,
    SegmentRecord, SymbolicPrompt, Tags, Tempo, Timbre, TimedNote,
};
use crate::refine::analysis::{is_straight_offbeat, STACCATO_MAX_LENGTH, SWING_DELAY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhraseSpec {
    pub key: Key,
    pub bpm: u16,
    pub meter: Meter,
    pub rhythm: RhythmPattern,
    pub density: Density,
    pub progression: ChordProgression,
    pub bars: usize,
}

impl PhraseSpec {
    pub fn new(key: Key) -> PhraseSpec {
        let progression = match key.mode {
            Mode::Major => ChordProgression::OneFourFiveOne,
            Mode::Minor => ChordProgression::MinorOneFourFiveOne,
        };
        PhraseSpec {
            key,
            bpm: 100,
            meter: Meter::FourFour,
            rhythm: RhythmPattern::Straight,
            density: Density::Medium,
            progression,
            bars: 4,
        }
    }
}

const CONTOUR: [u8; 14] = [0, 1, 2, 3, 4, 5, 6, 7, 6, 5, 4, 3, 2, 1];
/// Chords sound for one beat so the melody carries most of the key weight.
const CHORD_LENGTH: u32 = 480;
const CADENCE: [u8; 8] = [0, 2, 4, 7, 4, 2, 0, 0];

fn melody_durations(density: Density, ticks_per_bar: u32) -> Vec<u32> {
    let pattern: &[u32] = match density {
        Density::Sparse => &[960, 480],
        Density::Medium => &[480, 240, 240, 480],
        Density::Dense => &[240],
    };
    let mut out = Vec::new();
    let mut filled = 0;
    for &d in pattern.iter().cycle() {
        if filled >= ticks_per_bar {
            break;
        }
        let d = d.min(ticks_per_bar - filled);
        out.push(d);
        filled += d;
    }
    out
}

/// A phrase that states its key clearly: a scale-wise melody that opens
/// every bar on the tonic, over one block triad per bar following
/// `progression`, closing on a tonic arpeggio.
pub fn tonal_phrase(spec: &PhraseSpec) -> SymbolicPrompt {
    let tonic = spec.key.tonic();
    let scale = spec.key.scale();
    let melody_base = 60 + tonic;
    let ticks_per_bar = spec.meter.ticks_per_bar();
    let numerals = spec.progression.numerals();
    let bars = spec.bars.max(1);
    let mut notes = Vec::new();
    let mut step = 0usize;

    for bar in 0..bars {
        let offset = bar as u64 * u64::from(ticks_per_bar);
        let numeral = numerals[bar % numerals.len()];
        let root = 36 + (tonic + numeral.root_offset) % 12;
        let third = match numeral.quality {
            ChordQuality::Major => 4,
            ChordQuality::Minor => 3,
        };
        for interval in [0, third, 7] {
            notes.push(TimedNote {
                start: offset,
                end: offset + u64::from(CHORD_LENGTH),
                pitch: root + interval,
                velocity: 64,
            });
        }

        // The closing bar outlines the tonic triad so the key reads clearly.
        let contour: &[u8] = if bar + 1 == bars {
            step = 0;
            &CADENCE
        } else {
            &CONTOUR
        };
        let mut position = 0u32;
        for (i, length) in melody_durations(spec.density, ticks_per_bar).into_iter().enumerate() {
            // Every bar opens on the tonic.
            let degree = if i == 0 { 0 } else { contour[step % contour.len()] };
            step += 1;
            let above_tonic = (scale[usize::from(degree % 7)] + 12 - tonic) % 12;
            let pitch = melody_base + above_tonic + 12 * (degree / 7);
            notes.push(TimedNote {
                start: offset + u64::from(position),
                end: offset + u64::from(position + length),
                pitch,
                velocity: 80,
            });
            position += length;
        }
    }

    let mut notes = match spec.rhythm {
        RhythmPattern::Straight => notes,
        RhythmPattern::Swing => notes
            .into_iter()
            .map(|n| {
                let position = (n.start % u64::from(ticks_per_bar)) as u32;
                if is_straight_offbeat(position) {
                    TimedNote {
                        start: n.start + u64::from(SWING_DELAY),
                        ..n
                    }
                } else {
                    n
                }
            })
            .collect(),
        RhythmPattern::Staccato => notes
            .into_iter()
            .map(|n| TimedNote {
                end: n.end.min(n.start + u64::from(STACCATO_MAX_LENGTH)),
                ..n
            })
            .collect(),
    };
    notes.sort_by_key(|n| (n.start, n.pitch));
    SymbolicPrompt::from_timed(spec.bpm, spec.key, spec.meter, &notes, bars, Provenance::default())
        .expect("generated phrases respect prompt invariants")
}

struct SeedRow {
    id: &'static str,
    tonic: u8,
    mode: Mode,
    bpm: u16,
    meter: Meter,
    rhythm: RhythmPattern,
    density: Density,
    progression: ChordProgression,
    mood: Mood,
    genre: Genre,
    timbre: Timbre,
}

macro_rules! row {
    ($id:literal, $tonic:literal $mode:ident, $bpm:literal, $meter:ident, $rhythm:ident, $density:ident, $prog:ident, $mood:ident, $genre:ident, $timbre:ident) => {
        SeedRow {
            id: $id,
            tonic: $tonic,
            mode: Mode::$mode,
            bpm: $bpm,
            meter: Meter::$meter,
            rhythm: RhythmPattern::$rhythm,
            density: Density::$density,
            progression: ChordProgression::$prog,
            mood: Mood::$mood,
            genre: Genre::$genre,
            timbre: Timbre::$timbre,
        }
    };
}

fn seed_rows() -> Vec<SeedRow> {
    vec![
        row!("pop-bright-01", 0 Major, 128, FourFour, Straight, Dense, OneFiveSixFour, Happy, Pop, Piano),
        row!("rock-drive-02", 7 Major, 140, FourFour, Straight, Dense, OneFourFiveOne, Excited, Rock, Guitar),
        row!("folk-road-03", 2 Major, 100, FourFour, Straight, Medium, OneSixFourFive, Hopeful, Folk, Guitar),
        row!("waltz-calm-04", 5 Major, 96, ThreeFour, Straight, Medium, OneFourFiveOne, Calm, Classical, Strings),
        row!("elegy-05", 9 Minor, 70, FourFour, Straight, Sparse, MinorOneFourFiveOne, Sad, Classical, Piano),
        row!("ballad-swing-06", 2 Minor, 66, FourFour, Swing, Medium, MinorOneSevenSixSeven, Melancholic, Jazz, Piano),
        row!("film-dusk-07", 4 Minor, 76, FourFour, Straight, Sparse, MinorOneSixThreeSeven, Melancholic, Film, Strings),
        row!("bop-08", 10 Major, 112, FourFour, Swing, Dense, TwoFiveOne, Playful, Jazz, Brass),
        row!("nocturne-09", 0 Minor, 84, SixEight, Straight, Medium, MinorOneFourFiveOne, Mysterious, Film, Synth),
        row!("pulse-10", 4 Major, 150, TwoFour, Staccato, Dense, OneFourFiveOne, Excited, Electronic, Synth),
        row!("serenade-11", 8 Major, 92, FourFour, Straight, Medium, SixFourOneFive, Romantic, Pop, Piano),
        row!("tension-12", 7 Minor, 120, FourFour, Staccato, Dense, MinorOneFourFiveOne, Tense, Electronic, Synth),
        row!("anthem-13", 9 Major, 132, FourFour, Straight, Dense, OneFiveSixFour, Happy, Pop, Guitar),
        row!("lament-14", 6 Minor, 88, ThreeFour, Straight, Sparse, MinorOneSixThreeSeven, Sad, Folk, Strings),
        row!("lounge-15", 3 Major, 72, FourFour, Swing, Medium, TwoFiveOne, Calm, Jazz, Woodwind),
        row!("blues-16", 11 Minor, 104, FourFour, Swing, Medium, MinorOneFourFiveOne, Melancholic, Blues, Guitar),
        row!("drift-17", 1 Minor, 60, FourFour, Straight, Sparse, MinorOneSevenSixSeven, Calm, Ambient, Synth),
        row!("jig-18", 2 Major, 124, SixEight, Straight, Dense, OneFourFiveOne, Playful, Folk, Woodwind),
        row!("storm-19", 5 Minor, 136, FourFour, Straight, Dense, MinorOneSixThreeSeven, Excited, Rock, Guitar),
        row!("letter-20", 0 Major, 80, FourFour, Straight, Sparse, OneSixFourFive, Romantic, Classical, Piano),
    ]
}

/// Twenty tagged tonal segments covering every tag domain value used by
/// the lexicon's common intents.
pub fn seed_corpus() -> Vec<SegmentRecord> {
    seed_rows()
        .into_iter()
        .map(|r| {
            let key = Key::new(r.tonic, r.mode);
            let spec = PhraseSpec {
                key,
                bpm: r.bpm,
                meter: r.meter,
                rhythm: r.rhythm,
                density: r.density,
                progression: r.progression,
                bars: 4,
            };
            let tempo = Tempo::new(r.bpm).expect("seed tempos are in range");
            let tags: Tags = [
                AttributeValue::Key(key),
                AttributeValue::Tempo(tempo),
                AttributeValue::Meter(r.meter),
                AttributeValue::RhythmPattern(r.rhythm),
                AttributeValue::Density(r.density),
                AttributeValue::ChordProgression(r.progression),
                AttributeValue::Mood(r.mood),
                AttributeValue::Genre(r.genre),
                AttributeValue::Timbre(r.timbre),
            ]
            .into_iter()
            .collect();
            SegmentRecord {
                segment_id: r.id.to_string(),
                content: tonal_phrase(&spec).with_provenance(Provenance::from_segment(r.id)),
                tags,
            }
        })
        .collect()
}
