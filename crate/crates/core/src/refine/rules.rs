//! The registered refinement rules, in application order.

use serde::Serialize;

use crate::model::vocab::{ChordQuality, Numeral};
use crate::model::{
    AttributeId, AttributeValue, Bar, Density, Key, Mode, Mood, NoteEvent,
    PromptError, Provenance, RhythmPattern, SymbolicPrompt, Tags, Tempo, TimedNote,
};

use super::analysis::{
    block_chords, detect_density, identify_triad, detect_rhythm_pattern, is_straight_offbeat, is_swung_offbeat,
    DENSE_FROM, STACCATO_MAX_LENGTH, SWING_DELAY,
};

/// What a rule may look at besides the prompt and its target value.
pub struct RuleContext<'a> {
    pub segment_tags: &'a Tags,
    /// Provenance accumulated so far, including earlier refinements.
    pub history: &'a Provenance,
}

#[derive(Debug)]
pub enum RuleOutcome {
    /// The prompt already conforms.
    Unchanged,
    /// The rule cannot apply to this material; the note goes to provenance.
    Skipped(String),
    Applied(SymbolicPrompt, Option<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleError {
    pub bar: Option<usize>,
    pub reason: String,
}

impl From<PromptError> for RuleError {
    fn from(e: PromptError) -> Self {
        let bar = match &e {
            PromptError::Note { bar, .. } => Some(*bar),
            _ => None,
        };
        RuleError {
            bar,
            reason: e.to_string(),
        }
    }
}

pub type Transform = fn(&SymbolicPrompt, &AttributeValue, &RuleContext<'_>) -> Result<RuleOutcome, RuleError>;

#[derive(Clone, Serialize)]
pub struct RefinementRule {
    pub name: &'static str,
    pub applies_to: AttributeId,
    pub description: &'static str,
    #[serde(skip)]
    pub transform: Transform,
}

impl std::fmt::Debug for RefinementRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RefinementRule")
            .field("name", &self.name)
            .field("applies_to", &self.applies_to)
            .finish()
    }
}

pub const TRANSPOSE_KEY: &str = "transpose_key";
pub const CONVERT_MODE: &str = "convert_mode";
pub const REROOT_CHORDS: &str = "reroot_chords";
pub const SET_TEMPO: &str = "set_tempo";
pub const SET_METER: &str = "set_meter";
pub const APPLY_RHYTHM_PATTERN: &str = "apply_rhythm_pattern";
pub const ADJUST_DENSITY: &str = "adjust_density";
pub const SHAPE_VELOCITY: &str = "shape_velocity";

/// The shipped rules in their fixed application order.
pub fn default_rules() -> Vec<RefinementRule> {
    vec![
        RefinementRule {
            name: TRANSPOSE_KEY,
            applies_to: AttributeId::Key,
            description: "Shift every pitch to the requested tonic by the smallest interval (ties go up).",
            transform: transpose_key,
        },
        RefinementRule {
            name: CONVERT_MODE,
            applies_to: AttributeId::Key,
            description: "Switch to the parallel major or minor by moving scale degrees 3, 6 and 7.",
            transform: convert_mode,
        },
        RefinementRule {
            name: SET_TEMPO,
            applies_to: AttributeId::Tempo,
            description: "Set the tempo header; notes are unchanged.",
            transform: set_tempo,
        },
        RefinementRule {
            name: SET_METER,
            applies_to: AttributeId::Meter,
            description: "Re-bar the material in the requested meter.",
            transform: set_meter,
        },
        RefinementRule {
            name: REROOT_CHORDS,
            applies_to: AttributeId::ChordProgression,
            description: "Move block chords onto the requested roman-numeral sequence.",
            transform: reroot_chords,
        },
        RefinementRule {
            name: ADJUST_DENSITY,
            applies_to: AttributeId::Density,
            description: "Split notes in half for denser material or merge repeated notes for sparser material.",
            transform: adjust_density,
        },
        RefinementRule {
            name: APPLY_RHYTHM_PATTERN,
            applies_to: AttributeId::RhythmPattern,
            description: "Swing, straighten or detach notes.",
            transform: apply_rhythm_pattern,
        },
        RefinementRule {
            name: SHAPE_VELOCITY,
            applies_to: AttributeId::Mood,
            description: "Soften (x0.75) or brighten (x1.15) velocities to suit the mood.",
            transform: shape_velocity,
        },
    ]
}

fn rebuild(prompt: &SymbolicPrompt, notes: &[TimedNote]) -> Result<SymbolicPrompt, RuleError> {
    Ok(SymbolicPrompt::from_timed(
        prompt.tempo_bpm(),
        prompt.key(),
        prompt.meter(),
        notes,
        prompt.bars().len(),
        prompt.provenance().clone(),
    )?)
}

fn rebuild_bars(prompt: &SymbolicPrompt, bars: &[Bar]) -> Result<SymbolicPrompt, RuleError> {
    let ticks_per_bar = u64::from(prompt.ticks_per_bar());
    let notes: Vec<TimedNote> = bars
        .iter()
        .enumerate()
        .flat_map(|(t, bar)| {
            let offset = t as u64 * ticks_per_bar;
            bar.iter().map(move |n| TimedNote {
                start: offset + u64::from(n.position),
                end: offset + u64::from(n.end()),
                pitch: n.pitch,
                velocity: n.velocity,
            })
        })
        .collect();
    rebuild(prompt, &notes)
}

/// Smallest signed interval from one pitch class to another; a tritone
/// goes up.
pub fn minimal_shift(from: u8, to: u8) -> i32 {
    let up = (i32::from(to) - i32::from(from)).rem_euclid(12);
    if up > 6 {
        up - 12
    } else {
        up
    }
}

/// Shifts a pitch, folding by an octave if it leaves the MIDI range.
fn shifted(pitch: u8, by: i32) -> Option<u8> {
    let mut p = i32::from(pitch) + by;
    if p > 127 {
        p -= 12;
    }
    if p < 0 {
        p += 12;
    }
    u8::try_from(p).ok().filter(|p| *p <= 127)
}

fn shift_notes<F>(prompt: &SymbolicPrompt, mut shift_for: F) -> Result<Vec<Bar>, RuleError>
where
    F: FnMut(usize, &NoteEvent) -> i32,
{
    prompt
        .bars()
        .iter()
        .enumerate()
        .map(|(t, bar)| {
            bar.iter()
                .map(|n| {
                    let by = shift_for(t, n);
                    shifted(n.pitch, by)
                        .map(|pitch| NoteEvent { pitch, ..*n })
                        .ok_or_else(|| RuleError {
                            bar: Some(t),
                            reason: format!("pitch {} shifted by {by} leaves 0..=127", n.pitch),
                        })
                })
                .collect()
        })
        .collect()
}

fn target_key(target: &AttributeValue) -> Result<Key, RuleError> {
    match target {
        AttributeValue::Key(k) => Ok(*k),
        other => Err(wrong_target(other)),
    }
}

fn wrong_target(value: &AttributeValue) -> RuleError {
    RuleError {
        bar: None,
        reason: format!("rule cannot take a {} value", value.id()),
    }
}

fn transpose_key(prompt: &SymbolicPrompt, target: &AttributeValue, _: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let wanted = target_key(target)?;
    let current = prompt.key();
    if current.tonic() == wanted.tonic() {
        return Ok(RuleOutcome::Unchanged);
    }
    let by = minimal_shift(current.tonic(), wanted.tonic());
    let bars = shift_notes(prompt, |_, _| by)?;
    let moved = rebuild_bars(prompt, &bars)?.with_key(Key::new(wanted.tonic(), current.mode));
    Ok(RuleOutcome::Applied(moved, Some(format!("{TRANSPOSE_KEY}: {current} -> {} ({by:+} semitones)", moved_key_name(wanted.tonic(), current.mode)))))
}

fn moved_key_name(tonic: u8, mode: Mode) -> String {
    Key::new(tonic, mode).to_string()
}

/// Pitch-class offsets above the tonic that change between parallel modes.
fn mode_degrees(mode: Mode) -> [u8; 3] {
    match mode {
        Mode::Major => [4, 9, 11],
        Mode::Minor => [3, 8, 10],
    }
}

fn convert_mode(prompt: &SymbolicPrompt, target: &AttributeValue, _: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let wanted = target_key(target)?;
    let current = prompt.key();
    if current.mode == wanted.mode {
        return Ok(RuleOutcome::Unchanged);
    }
    let degrees = mode_degrees(current.mode);
    let by = if current.mode == Mode::Major { -1 } else { 1 };
    let tonic = current.tonic();
    let bars = shift_notes(prompt, |_, n| {
        let offset = (n.pitch % 12 + 12 - tonic) % 12;
        if degrees.contains(&offset) {
            by
        } else {
            0
        }
    })?;
    let converted = rebuild_bars(prompt, &bars)?.with_key(current.with_mode(wanted.mode));
    Ok(RuleOutcome::Applied(converted, None))
}

fn reroot_chords(prompt: &SymbolicPrompt, target: &AttributeValue, ctx: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let AttributeValue::ChordProgression(wanted) = target else {
        return Err(wrong_target(target));
    };
    let Some(AttributeValue::ChordProgression(source)) = ctx.segment_tags.get(AttributeId::ChordProgression).copied() else {
        return Ok(RuleOutcome::Skipped(format!(
            "{REROOT_CHORDS} skipped: segment has no chord_progression tag"
        )));
    };
    if source == *wanted {
        return Ok(RuleOutcome::Unchanged);
    }
    if prompt.bars().iter().all(|bar| block_chords(bar).is_empty()) {
        return Ok(RuleOutcome::Skipped(format!(
            "{REROOT_CHORDS} skipped: segment has no block chords"
        )));
    }
    let to: Vec<Numeral> = wanted.numerals();
    let tonic = prompt.key().tonic();
    let mut bars: Vec<Bar> = prompt.bars().to_vec();
    for (t, bar) in bars.iter_mut().enumerate() {
        let chords = block_chords(bar);
        if chords.is_empty() {
            continue;
        }
        let new = to[t % to.len()];
        let root = (tonic + new.root_offset) % 12;
        let third = match new.quality {
            ChordQuality::Major => (root + 4) % 12,
            ChordQuality::Minor => (root + 3) % 12,
        };
        for members in chords.values() {
            // Earlier rules may have moved the chord off the tagged degree,
            // so prefer the root actually sounding.
            let pitches: Vec<u8> = members.iter().map(|&i| bar[i].pitch).collect();
            let Some((sounding, quality)) = identify_triad(&pitches) else {
                continue;
            };
            let by = minimal_shift(sounding, root);
            let sounding_third = match quality {
                ChordQuality::Major => (root + 4) % 12,
                ChordQuality::Minor => (root + 3) % 12,
            };
            let mut moved = Vec::with_capacity(members.len());
            for &i in members {
                let from = bar[i].pitch;
                let mut pitch = shifted(from, by).ok_or_else(|| RuleError {
                    bar: Some(t),
                    reason: format!("chord tone {from} cannot move by {by}"),
                })?;
                let pc = pitch % 12;
                if pc == sounding_third && pc != third {
                    let fix = i32::from(third) - i32::from(pc);
                    pitch = shifted(pitch, fix).ok_or_else(|| RuleError {
                        bar: Some(t),
                        reason: format!("chord third {pitch} cannot move by {fix}"),
                    })?;
                }
                moved.push(pitch);
            }
            // Extra tones can make the result read as another chord; such
            // clusters are left alone.
            if identify_triad(&moved) != Some((root, new.quality)) {
                continue;
            }
            for (&i, pitch) in members.iter().zip(moved) {
                bar[i].pitch = pitch;
            }
        }
    }
    Ok(RuleOutcome::Applied(rebuild_bars(prompt, &bars)?, None))
}

fn set_tempo(prompt: &SymbolicPrompt, target: &AttributeValue, _: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let AttributeValue::Tempo(Tempo { bpm, .. }) = target else {
        return Err(wrong_target(target));
    };
    if prompt.tempo_bpm() == *bpm {
        return Ok(RuleOutcome::Unchanged);
    }
    Ok(RuleOutcome::Applied(prompt.with_tempo(*bpm)?, None))
}

fn set_meter(prompt: &SymbolicPrompt, target: &AttributeValue, _: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let AttributeValue::Meter(meter) = target else {
        return Err(wrong_target(target));
    };
    if prompt.meter() == *meter {
        return Ok(RuleOutcome::Unchanged);
    }
    let min_bars = prompt.total_ticks().div_ceil(u64::from(meter.ticks_per_bar())) as usize;
    let rebarred = SymbolicPrompt::from_timed(
        prompt.tempo_bpm(),
        prompt.key(),
        *meter,
        &prompt.timed_notes(),
        min_bars,
        prompt.provenance().clone(),
    )?;
    Ok(RuleOutcome::Applied(rebarred, None))
}

fn map_notes<F>(prompt: &SymbolicPrompt, mut f: F) -> Vec<Bar>
where
    F: FnMut(&NoteEvent) -> NoteEvent,
{
    prompt
        .bars()
        .iter()
        .map(|bar| bar.iter().map(&mut f).collect())
        .collect()
}

fn swing(prompt: &SymbolicPrompt) -> Vec<Bar> {
    let ticks_per_bar = prompt.ticks_per_bar();
    map_notes(prompt, |n| {
        if !is_straight_offbeat(n.position) {
            return *n;
        }
        let position = n.position + SWING_DELAY;
        // Keep the release time where it was when the note is long enough.
        let length = if n.length > SWING_DELAY {
            n.length - SWING_DELAY
        } else {
            n.length.min(ticks_per_bar - position)
        };
        NoteEvent { position, length, ..*n }
    })
}

fn unswing(prompt: &SymbolicPrompt) -> Vec<Bar> {
    map_notes(prompt, |n| {
        if !is_swung_offbeat(n.position) {
            return *n;
        }
        NoteEvent {
            position: n.position - SWING_DELAY,
            length: n.length + SWING_DELAY,
            ..*n
        }
    })
}

fn apply_rhythm_pattern(prompt: &SymbolicPrompt, target: &AttributeValue, _: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let AttributeValue::RhythmPattern(wanted) = target else {
        return Err(wrong_target(target));
    };
    let current = detect_rhythm_pattern(prompt);
    if current == *wanted || prompt.note_count() == 0 {
        return Ok(RuleOutcome::Unchanged);
    }
    let bars = match wanted {
        RhythmPattern::Swing => swing(prompt),
        RhythmPattern::Straight => {
            if current != RhythmPattern::Swing {
                return Ok(RuleOutcome::Skipped(format!(
                    "{APPLY_RHYTHM_PATTERN}: detached notes cannot be lengthened without inventing material"
                )));
            }
            unswing(prompt)
        }
        RhythmPattern::Staccato => {
            let straight = if current == RhythmPattern::Swing {
                rebuild_bars(prompt, &unswing(prompt))?
            } else {
                prompt.clone()
            };
            map_notes(&straight, |n| NoteEvent {
                length: n.length.min(STACCATO_MAX_LENGTH),
                ..*n
            })
        }
    };
    let out = rebuild_bars(prompt, &bars)?;
    if out.bars() == prompt.bars() {
        return Ok(RuleOutcome::Unchanged);
    }
    Ok(RuleOutcome::Applied(out, None))
}

/// Splits every note of at least an eighth into two halves.
fn split_notes(prompt: &SymbolicPrompt) -> Result<SymbolicPrompt, RuleError> {
    let bars: Vec<Bar> = prompt
        .bars()
        .iter()
        .map(|bar| {
            bar.iter()
                .flat_map(|n| {
                    if n.length >= 2 * STACCATO_MAX_LENGTH {
                        let first = n.length / 2;
                        vec![
                            NoteEvent { length: first, ..*n },
                            NoteEvent {
                                position: n.position + first,
                                length: n.length - first,
                                ..*n
                            },
                        ]
                    } else {
                        vec![*n]
                    }
                })
                .collect()
        })
        .collect();
    rebuild_bars(prompt, &bars)
}

/// Joins a note with the next note of the same pitch that starts exactly
/// where it ends, within a bar.
fn merge_repeats(prompt: &SymbolicPrompt) -> Result<SymbolicPrompt, RuleError> {
    let bars: Vec<Bar> = prompt
        .bars()
        .iter()
        .map(|bar| {
            let mut by_pitch: Vec<NoteEvent> = bar.clone();
            by_pitch.sort_by_key(|n| (n.pitch, n.position));
            let mut merged: Vec<NoteEvent> = Vec::with_capacity(by_pitch.len());
            for n in by_pitch {
                match merged.last_mut() {
                    Some(prev) if prev.pitch == n.pitch && prev.end() == n.position => {
                        prev.length += n.length;
                    }
                    _ => merged.push(n),
                }
            }
            merged
        })
        .collect();
    rebuild_bars(prompt, &bars)
}

fn adjust_density(prompt: &SymbolicPrompt, target: &AttributeValue, _: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let AttributeValue::Density(wanted) = target else {
        return Err(wrong_target(target));
    };
    let current = detect_density(prompt);
    if current == *wanted || prompt.note_count() == 0 {
        return Ok(RuleOutcome::Unchanged);
    }
    let denser = matches!(
        (current, wanted),
        (Density::Sparse, _) | (Density::Medium, Density::Dense)
    );
    let mut out = prompt.clone();
    if denser {
        loop {
            let next = split_notes(&out)?;
            if next.bars() == out.bars() {
                break;
            }
            out = next;
            let reached = detect_density(&out);
            if reached == *wanted || super::analysis::onsets_per_quarter(&out) >= DENSE_FROM {
                break;
            }
        }
    } else {
        out = merge_repeats(&out)?;
    }
    if out.bars() == prompt.bars() {
        return Ok(RuleOutcome::Skipped(format!(
            "{ADJUST_DENSITY}: material offers nothing to split or merge"
        )));
    }
    Ok(RuleOutcome::Applied(out, None))
}

/// Velocity factor for a mood, if it has one.
pub fn mood_velocity_factor(mood: Mood) -> Option<f64> {
    match mood {
        Mood::Sad | Mood::Calm | Mood::Melancholic => Some(0.75),
        Mood::Excited | Mood::Happy => Some(1.15),
        _ => None,
    }
}

pub fn scale_velocity(velocity: u8, factor: f64) -> u8 {
    (f64::from(velocity) * factor).round().clamp(1.0, 127.0) as u8
}

pub fn velocity_marker(mood: Mood) -> String {
    format!("{SHAPE_VELOCITY}: {mood}")
}

fn shape_velocity(prompt: &SymbolicPrompt, target: &AttributeValue, ctx: &RuleContext<'_>) -> Result<RuleOutcome, RuleError> {
    let AttributeValue::Mood(mood) = target else {
        return Err(wrong_target(target));
    };
    let Some(factor) = mood_velocity_factor(*mood) else {
        return Ok(RuleOutcome::Unchanged);
    };
    if ctx.segment_tags.get(AttributeId::Mood) == Some(target) {
        return Ok(RuleOutcome::Unchanged);
    }
    let marker = velocity_marker(*mood);
    if ctx.history.notes.contains(&marker) {
        return Ok(RuleOutcome::Unchanged);
    }
    let bars = map_notes(prompt, |n| NoteEvent {
        velocity: scale_velocity(n.velocity, factor),
        ..*n
    });
    Ok(RuleOutcome::Applied(prompt.with_bars(bars)?, Some(marker)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_shift_prefers_small_intervals() {
        assert_eq!(minimal_shift(0, 2), 2);
        assert_eq!(minimal_shift(0, 9), -3);
        assert_eq!(minimal_shift(0, 6), 6);
        assert_eq!(minimal_shift(6, 0), 6);
        assert_eq!(minimal_shift(11, 1), 2);
        assert_eq!(minimal_shift(5, 5), 0);
    }

    #[test]
    fn pitch_folding() {
        assert_eq!(shifted(127, 2), Some(117));
        assert_eq!(shifted(1, -3), Some(10));
        assert_eq!(shifted(60, 0), Some(60));
    }

    #[test]
    fn velocity_scaling_clamps() {
        assert_eq!(scale_velocity(1, 0.75), 1);
        assert_eq!(scale_velocity(100, 0.75), 75);
        assert_eq!(scale_velocity(120, 1.15), 127);
        assert_eq!(scale_velocity(90, 0.75), 68);
    }

    #[test]
    fn registry_names_are_unique() {
        let rules = default_rules();
        let mut names: Vec<_> = rules.iter().map(|r| r.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), rules.len());
    }

    #[test]
    fn swing_delay_is_a_third_of_an_eighth() {
        assert_eq!(SWING_DELAY * 3, 240);
    }
}
