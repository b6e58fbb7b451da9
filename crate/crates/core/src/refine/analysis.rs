//! Properties read back from symbolic material: rhythm feel, onset
//! density and block-chord numerals.

use std::collections::BTreeMap;

use crate::model::vocab::{numeral_for, ChordQuality, Numeral};
use crate::model::{Bar, Density, Key, NoteEvent, RhythmPattern, SymbolicPrompt, TICKS_PER_QUARTER};

pub const EIGHTH: u32 = TICKS_PER_QUARTER / 2;
/// Off-beat delay for swing: a third of an eighth.
pub const SWING_DELAY: u32 = EIGHTH / 3;
/// Notes no longer than a sixteenth count as detached.
pub const STACCATO_MAX_LENGTH: u32 = TICKS_PER_QUARTER / 4;

/// Onsets per quarter below which material is sparse.
pub const SPARSE_BELOW: f64 = 1.0;
/// Onsets per quarter from which material is dense.
pub const DENSE_FROM: f64 = 2.0;

pub fn is_straight_offbeat(position: u32) -> bool {
    position % TICKS_PER_QUARTER == EIGHTH
}

pub fn is_swung_offbeat(position: u32) -> bool {
    position % TICKS_PER_QUARTER == EIGHTH + SWING_DELAY
}

/// Swing if off-beats are all delayed; staccato if every note is short;
/// otherwise straight.
pub fn detect_rhythm_pattern(prompt: &SymbolicPrompt) -> RhythmPattern {
    let notes: Vec<&NoteEvent> = prompt.bars().iter().flatten().collect();
    let straight = notes.iter().filter(|n| is_straight_offbeat(n.position)).count();
    let swung = notes.iter().filter(|n| is_swung_offbeat(n.position)).count();
    if swung > 0 && straight == 0 {
        RhythmPattern::Swing
    } else if !notes.is_empty() && notes.iter().all(|n| n.length <= STACCATO_MAX_LENGTH) {
        RhythmPattern::Staccato
    } else {
        RhythmPattern::Straight
    }
}

/// Distinct onset times per quarter note over the whole prompt.
pub fn onsets_per_quarter(prompt: &SymbolicPrompt) -> f64 {
    let onsets: usize = prompt
        .bars()
        .iter()
        .map(|bar| {
            let mut positions: Vec<u32> = bar.iter().map(|n| n.position).collect();
            positions.dedup();
            positions.len()
        })
        .sum();
    let quarters = prompt.bars().len() as f64 * prompt.meter().quarters_per_bar();
    onsets as f64 / quarters
}

pub fn density_for_rate(rate: f64) -> Density {
    if rate < SPARSE_BELOW {
        Density::Sparse
    } else if rate < DENSE_FROM {
        Density::Medium
    } else {
        Density::Dense
    }
}

pub fn detect_density(prompt: &SymbolicPrompt) -> Density {
    density_for_rate(onsets_per_quarter(prompt))
}

/// Groups of three or more notes struck together in one bar, keyed by
/// position. Each group lists the three lowest notes, which are taken as the
/// chord voicing; anything above belongs to the melody.
pub fn block_chords(bar: &Bar) -> BTreeMap<u32, Vec<usize>> {
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, n) in bar.iter().enumerate() {
        groups.entry(n.position).or_default().push(i);
    }
    groups.retain(|_, members| members.len() >= 3);
    for members in groups.values_mut() {
        members.sort_by_key(|&i| bar[i].pitch);
        members.truncate(3);
    }
    groups
}

/// Root pitch class and quality of a triad-like pitch set. Candidate roots
/// are tried from the bass up, so a melody note doubling the onset does not
/// steal the root.
pub fn identify_triad(pitches: &[u8]) -> Option<(u8, ChordQuality)> {
    let mut sorted = pitches.to_vec();
    sorted.sort_unstable();
    let classes: Vec<u8> = sorted.iter().map(|p| p % 12).collect();
    for &root in &classes {
        let has = |interval: u8| classes.contains(&((root + interval) % 12));
        if has(7) {
            if has(4) {
                return Some((root, ChordQuality::Major));
            }
            if has(3) {
                return Some((root, ChordQuality::Minor));
            }
        }
    }
    None
}

/// Roman numeral of the first block chord in each bar that has one.
pub fn detect_chord_numerals(prompt: &SymbolicPrompt, key: Key) -> Vec<(usize, Option<Numeral>)> {
    prompt
        .bars()
        .iter()
        .enumerate()
        .filter_map(|(t, bar)| {
            let chords = block_chords(bar);
            let (_, members) = chords.iter().next()?;
            let pitches: Vec<u8> = members.iter().map(|&i| bar[i].pitch).collect();
            let numeral = identify_triad(&pitches).and_then(|(root, quality)| {
                numeral_for((root + 12 - key.tonic()) % 12, quality)
            });
            Some((t, numeral))
        })
        .collect()
}
