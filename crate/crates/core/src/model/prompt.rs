use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::segment::Tags;
use super::vocab::{Key, Meter, MAX_BPM, MIN_BPM, TICKS_PER_QUARTER};

/// One note tuple: pitch, bar-relative position, length and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    pub position: u32,
    pub length: u32,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn new(pitch: u8, position: u32, length: u32, velocity: u8) -> NoteEvent {
        NoteEvent {
            pitch,
            position,
            length,
            velocity,
        }
    }

    pub fn end(&self) -> u32 {
        self.position + self.length
    }

    fn check(&self, ticks_per_bar: u32) -> Result<(), String> {
        if self.pitch > 127 {
            return Err(format!("pitch {} exceeds 127", self.pitch));
        }
        if self.velocity == 0 || self.velocity > 127 {
            return Err(format!("velocity {} outside 1..=127", self.velocity));
        }
        if self.length == 0 {
            return Err("length must be at least one tick".into());
        }
        if self.position >= ticks_per_bar {
            return Err(format!(
                "position {} outside bar of {ticks_per_bar} ticks",
                self.position
            ));
        }
        if self.end() > ticks_per_bar {
            return Err(format!(
                "note ending at {} crosses the bar end {ticks_per_bar} without being split",
                self.end()
            ));
        }
        Ok(())
    }
}

pub type Bar = Vec<NoteEvent>;

/// A note in absolute ticks from the start of the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimedNote {
    pub start: u64,
    pub end: u64,
    pub pitch: u8,
    pub velocity: u8,
}

/// Where a prompt came from and what was done to it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub segment_id: Option<String>,
    /// Tags of the originating segment, kept for alignment heuristics.
    #[serde(default, skip_serializing_if = "Tags::is_empty")]
    pub segment_tags: Tags,
    /// Applied refinement rules, in application order.
    #[serde(default)]
    pub rules: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn from_segment(segment_id: impl Into<String>) -> Provenance {
        Provenance {
            segment_id: Some(segment_id.into()),
            ..Provenance::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("a prompt needs at least one bar")]
    NoBars,
    #[error("tempo {0} bpm outside {MIN_BPM}..={MAX_BPM}")]
    TempoOutOfRange(u16),
    #[error("ticks per quarter must be {TICKS_PER_QUARTER}, got {0}")]
    Resolution(u32),
    #[error("bar {bar}, note {index}: {reason}")]
    Note {
        bar: usize,
        index: usize,
        reason: String,
    },
    #[error("pitch {pitch} sounds twice at tick {tick}")]
    Overlap { pitch: u8, tick: u64 },
}

#[derive(Deserialize)]
struct RawPrompt {
    tempo_bpm: u16,
    key: Key,
    meter: Meter,
    ticks_per_quarter: u32,
    bars: Vec<Bar>,
    #[serde(default)]
    provenance: Provenance,
}

impl TryFrom<RawPrompt> for SymbolicPrompt {
    type Error = PromptError;

    fn try_from(raw: RawPrompt) -> Result<Self, Self::Error> {
        if raw.ticks_per_quarter != TICKS_PER_QUARTER {
            return Err(PromptError::Resolution(raw.ticks_per_quarter));
        }
        SymbolicPrompt::new(raw.tempo_bpm, raw.key, raw.meter, raw.bars, raw.provenance)
    }
}

/// The sketch: header plus bar-indexed note tuples.
///
/// Fields are private so that every value in circulation has passed
/// [`SymbolicPrompt::new`]: notes lie inside their bar, bars are sorted by
/// (position, pitch), and no pitch overlaps itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrompt")]
pub struct SymbolicPrompt {
    tempo_bpm: u16,
    key: Key,
    meter: Meter,
    ticks_per_quarter: u32,
    bars: Vec<Bar>,
    provenance: Provenance,
}

impl SymbolicPrompt {
    pub fn new(
        tempo_bpm: u16,
        key: Key,
        meter: Meter,
        mut bars: Vec<Bar>,
        provenance: Provenance,
    ) -> Result<SymbolicPrompt, PromptError> {
        if !(MIN_BPM..=MAX_BPM).contains(&tempo_bpm) {
            return Err(PromptError::TempoOutOfRange(tempo_bpm));
        }
        if bars.is_empty() {
            return Err(PromptError::NoBars);
        }
        let ticks_per_bar = meter.ticks_per_bar();
        for (bar_index, bar) in bars.iter_mut().enumerate() {
            bar.sort_by_key(|n| (n.position, n.pitch, n.length, n.velocity));
            for (index, note) in bar.iter().enumerate() {
                note.check(ticks_per_bar).map_err(|reason| PromptError::Note {
                    bar: bar_index,
                    index,
                    reason,
                })?;
            }
        }
        let prompt = SymbolicPrompt {
            tempo_bpm,
            key,
            meter,
            ticks_per_quarter: TICKS_PER_QUARTER,
            bars,
            provenance,
        };
        prompt.check_overlaps()?;
        Ok(prompt)
    }

    /// Builds a prompt from absolute-time notes, splitting notes at bar
    /// lines into tied pieces and trimming same-pitch overlaps. The result
    /// has at least `min_bars` bars.
    pub fn from_timed(
        tempo_bpm: u16,
        key: Key,
        meter: Meter,
        notes: &[TimedNote],
        min_bars: usize,
        provenance: Provenance,
    ) -> Result<SymbolicPrompt, PromptError> {
        let ticks_per_bar = u64::from(meter.ticks_per_bar());
        let notes = resolve_overlaps(notes);
        let last_end = notes.iter().map(|n| n.end).max().unwrap_or(0);
        let bar_count = (last_end.div_ceil(ticks_per_bar) as usize).max(min_bars).max(1);
        let mut bars: Vec<Bar> = vec![Vec::new(); bar_count];
        for note in notes {
            let mut start = note.start;
            while start < note.end {
                let bar = start / ticks_per_bar;
                let bar_end = (bar + 1) * ticks_per_bar;
                let piece_end = note.end.min(bar_end);
                bars[bar as usize].push(NoteEvent {
                    pitch: note.pitch,
                    position: (start - bar * ticks_per_bar) as u32,
                    length: (piece_end - start) as u32,
                    velocity: note.velocity,
                });
                start = piece_end;
            }
        }
        SymbolicPrompt::new(tempo_bpm, key, meter, bars, provenance)
    }

    fn check_overlaps(&self) -> Result<(), PromptError> {
        let mut timed = self.timed_notes();
        timed.sort_by_key(|n| (n.pitch, n.start, n.end));
        for pair in timed.windows(2) {
            if pair[0].pitch == pair[1].pitch && pair[1].start < pair[0].end {
                return Err(PromptError::Overlap {
                    pitch: pair[1].pitch,
                    tick: pair[1].start,
                });
            }
        }
        Ok(())
    }

    pub fn tempo_bpm(&self) -> u16 {
        self.tempo_bpm
    }

    pub fn key(&self) -> Key {
        self.key
    }

    pub fn meter(&self) -> Meter {
        self.meter
    }

    pub fn ticks_per_quarter(&self) -> u32 {
        self.ticks_per_quarter
    }

    pub fn ticks_per_bar(&self) -> u32 {
        self.meter.ticks_per_bar()
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn note_count(&self) -> usize {
        self.bars.iter().map(Vec::len).sum()
    }

    pub fn total_ticks(&self) -> u64 {
        self.bars.len() as u64 * u64::from(self.ticks_per_bar())
    }

    /// All notes in absolute ticks, in bar order.
    pub fn timed_notes(&self) -> Vec<TimedNote> {
        let ticks_per_bar = u64::from(self.ticks_per_bar());
        self.bars
            .iter()
            .enumerate()
            .flat_map(|(i, bar)| {
                let offset = i as u64 * ticks_per_bar;
                bar.iter().map(move |n| TimedNote {
                    start: offset + u64::from(n.position),
                    end: offset + u64::from(n.end()),
                    pitch: n.pitch,
                    velocity: n.velocity,
                })
            })
            .collect()
    }

    pub fn with_tempo(&self, tempo_bpm: u16) -> Result<SymbolicPrompt, PromptError> {
        SymbolicPrompt::new(
            tempo_bpm,
            self.key,
            self.meter,
            self.bars.clone(),
            self.provenance.clone(),
        )
    }

    /// Replaces the key header only; notes are untouched.
    pub fn with_key(&self, key: Key) -> SymbolicPrompt {
        SymbolicPrompt {
            key,
            ..self.clone()
        }
    }

    pub fn with_bars(&self, bars: Vec<Bar>) -> Result<SymbolicPrompt, PromptError> {
        SymbolicPrompt::new(
            self.tempo_bpm,
            self.key,
            self.meter,
            bars,
            self.provenance.clone(),
        )
    }

    pub fn with_provenance(&self, provenance: Provenance) -> SymbolicPrompt {
        SymbolicPrompt {
            provenance,
            ..self.clone()
        }
    }

    /// Same content with an empty provenance; used for comparisons that
    /// ignore history.
    pub fn without_provenance(&self) -> SymbolicPrompt {
        self.with_provenance(Provenance::default())
    }
}

/// Drops exact duplicates and truncates a note where the next note of the
/// same pitch begins.
pub fn resolve_overlaps(notes: &[TimedNote]) -> Vec<TimedNote> {
    let mut sorted: Vec<TimedNote> = notes.iter().copied().filter(|n| n.end > n.start).collect();
    sorted.sort_by(|a, b| {
        (a.pitch, a.start)
            .cmp(&(b.pitch, b.start))
            .then(b.end.cmp(&a.end))
    });
    let mut out: Vec<TimedNote> = Vec::with_capacity(sorted.len());
    for note in sorted {
        if let Some(prev) = out.last_mut() {
            if prev.pitch == note.pitch && note.start < prev.end {
                if note.start == prev.start {
                    continue;
                }
                prev.end = note.start;
            }
        }
        out.push(note);
    }
    out.sort_by_key(|n| (n.start, n.pitch));
    out
}
