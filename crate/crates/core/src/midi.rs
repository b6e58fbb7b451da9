//! Standard MIDI File reading and writing.
//!
//! The writer emits format-0 files at 480 ticks per quarter with tempo,
//! key-signature and time-signature meta events at tick 0, one note-on /
//! note-off pair per note, and the end-of-track at the final bar line.
//! Note-offs sort before note-ons on the same tick so that tied pieces
//! re-parse as separate notes.
//!
//! The reader accepts format 0 and 1, flattens all tracks and channels
//! except the percussion channel, and re-quantizes to 480 tpq.

use thiserror::Error;

use crate::model::{
    Key, Meter, Mode, PromptError, Provenance, SymbolicPrompt, TimedNote, MAX_BPM, MIN_BPM,
    TICKS_PER_QUARTER,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed MIDI at byte {offset}: {reason}")]
pub struct MidiParseError {
    pub offset: usize,
    pub reason: String,
}

impl MidiParseError {
    fn new(offset: usize, reason: impl Into<String>) -> Self {
        MidiParseError {
            offset,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MidiError {
    #[error(transparent)]
    Parse(#[from] MidiParseError),
    #[error("MIDI content does not form a legal prompt: {0}")]
    Prompt(#[from] PromptError),
}

const PERCUSSION_CHANNEL: u8 = 9;
const DEFAULT_TEMPO_US: u32 = 500_000;

/// Key signature as stored in the file: sharps (positive) or flats
/// (negative), and the minor flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeySignature {
    pub fifths: i8,
    pub minor: bool,
}

impl KeySignature {
    pub fn from_key(key: Key) -> KeySignature {
        let major_tonic = match key.mode {
            Mode::Major => key.tonic(),
            Mode::Minor => (key.tonic() + 3) % 12,
        };
        // Position on the circle of fifths, folded into -5..=6 so that F#
        // is written with sharps and the remaining black keys with flats.
        let fifths = (i32::from(major_tonic) * 7).rem_euclid(12);
        let fifths = if fifths > 6 { fifths - 12 } else { fifths };
        KeySignature {
            fifths: fifths as i8,
            minor: key.mode == Mode::Minor,
        }
    }

    pub fn to_key(self) -> Key {
        let major_tonic = (i32::from(self.fifths) * 7).rem_euclid(12) as u8;
        if self.minor {
            Key::new((major_tonic + 9) % 12, Mode::Minor)
        } else {
            Key::new(major_tonic, Mode::Major)
        }
    }
}

/// Raw musical content recovered from a file, before bar-splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMidi {
    pub format: u16,
    pub ticks_per_quarter: u16,
    /// Notes in the file's own tick resolution.
    pub notes: Vec<TimedNote>,
    pub tempo_us_per_quarter: Option<u32>,
    pub time_signature: Option<(u8, u8)>,
    pub key_signature: Option<KeySignature>,
    /// Latest end-of-track tick over all tracks.
    pub end_tick: u64,
}

impl ParsedMidi {
    pub fn tempo_bpm(&self) -> u16 {
        let us = self.tempo_us_per_quarter.unwrap_or(DEFAULT_TEMPO_US).max(1);
        let bpm = (60_000_000.0 / f64::from(us)).round();
        bpm.clamp(f64::from(MIN_BPM), f64::from(MAX_BPM)) as u16
    }

    pub fn meter(&self) -> Option<Meter> {
        match self.time_signature {
            None => Some(Meter::FourFour),
            Some((n, d)) => Meter::from_signature(n, d),
        }
    }

    fn quantize(&self, tick: u64) -> u64 {
        let tpq = u64::from(self.ticks_per_quarter);
        (tick * u64::from(TICKS_PER_QUARTER) + tpq / 2) / tpq
    }

    /// Converts to a prompt at 480 tpq using `key` for the header.
    pub fn into_prompt(&self, key: Key, provenance: Provenance) -> Result<SymbolicPrompt, MidiError> {
        let meter = self.meter().ok_or_else(|| {
            let (n, d) = self.time_signature.unwrap_or((0, 0));
            MidiParseError::new(0, format!("unsupported time signature {n}/{d}"))
        })?;
        let notes: Vec<TimedNote> = self
            .notes
            .iter()
            .map(|n| {
                let start = self.quantize(n.start);
                let end = self.quantize(n.end).max(start + 1);
                TimedNote {
                    start,
                    end,
                    pitch: n.pitch,
                    velocity: n.velocity,
                }
            })
            .collect();
        let ticks_per_bar = u64::from(meter.ticks_per_bar());
        let min_bars = self.quantize(self.end_tick).div_ceil(ticks_per_bar) as usize;
        Ok(SymbolicPrompt::from_timed(
            self.tempo_bpm(),
            key,
            meter,
            &notes,
            min_bars,
            provenance,
        )?)
    }
}

/// Parses a file into a prompt, taking the key from the key-signature meta
/// event or C major when there is none.
pub fn parse_prompt(bytes: &[u8]) -> Result<SymbolicPrompt, MidiError> {
    let parsed = read_smf(bytes)?;
    let key = parsed
        .key_signature
        .map(KeySignature::to_key)
        .unwrap_or(Key::C_MAJOR);
    parsed.into_prompt(key, Provenance::default())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Result<u8, MidiParseError> {
        if self.pos >= self.end {
            return Err(MidiParseError::new(self.pos, "unexpected end of data"));
        }
        let b = self.bytes[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiParseError> {
        if self.end - self.pos < n {
            return Err(MidiParseError::new(
                self.pos,
                format!("needed {n} bytes, {} left", self.end - self.pos),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn vlq(&mut self) -> Result<u32, MidiParseError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiParseError::new(start, "variable-length quantity longer than 4 bytes"))
    }
}

fn be_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

pub fn read_smf(bytes: &[u8]) -> Result<ParsedMidi, MidiParseError> {
    if bytes.is_empty() {
        return Err(MidiParseError::new(0, "empty input"));
    }
    if bytes.len() < 14 || &bytes[0..4] != b"MThd" {
        return Err(MidiParseError::new(0, "missing MThd header chunk"));
    }
    let header_len = be_u32(&bytes[4..8]) as usize;
    if header_len < 6 || bytes.len() < 8 + header_len {
        return Err(MidiParseError::new(4, "truncated header chunk"));
    }
    let format = be_u16(&bytes[8..10]);
    let track_count = be_u16(&bytes[10..12]);
    let division = be_u16(&bytes[12..14]);
    if format > 1 {
        return Err(MidiParseError::new(8, format!("format {format} is not supported")));
    }
    if format == 0 && track_count != 1 {
        return Err(MidiParseError::new(10, "format 0 requires exactly one track"));
    }
    if division & 0x8000 != 0 {
        return Err(MidiParseError::new(12, "SMPTE time division is not supported"));
    }
    if division == 0 {
        return Err(MidiParseError::new(12, "zero ticks per quarter"));
    }

    let mut parsed = ParsedMidi {
        format,
        ticks_per_quarter: division,
        notes: Vec::new(),
        tempo_us_per_quarter: None,
        time_signature: None,
        key_signature: None,
        end_tick: 0,
    };

    let mut pos = 8 + header_len;
    let mut tracks_read = 0;
    while tracks_read < track_count {
        if bytes.len() - pos < 8 {
            return Err(MidiParseError::new(
                pos,
                format!("expected {track_count} tracks, found {tracks_read}"),
            ));
        }
        let kind = &bytes[pos..pos + 4];
        let len = be_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body = pos + 8;
        if bytes.len() - body < len {
            return Err(MidiParseError::new(pos + 4, "chunk length runs past end of file"));
        }
        if kind == b"MTrk" {
            read_track(bytes, body, body + len, &mut parsed)?;
            tracks_read += 1;
        }
        pos = body + len;
    }
    parsed.notes.sort_by_key(|n| (n.start, n.pitch, n.end));
    Ok(parsed)
}

fn read_track(bytes: &[u8], start: usize, end: usize, out: &mut ParsedMidi) -> Result<(), MidiParseError> {
    let mut cur = Cursor {
        bytes,
        pos: start,
        end,
    };
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    // Open notes per (channel, pitch), paired first-in first-out.
    let mut open: std::collections::HashMap<(u8, u8), std::collections::VecDeque<(u64, u8)>> =
        std::collections::HashMap::new();
    let mut saw_end = false;

    while cur.pos < cur.end {
        tick += u64::from(cur.vlq()?);
        let status_at = cur.pos;
        let first = cur.u8()?;
        let status = if first & 0x80 != 0 {
            first
        } else {
            let s = running.ok_or_else(|| {
                MidiParseError::new(status_at, "data byte without running status")
            })?;
            cur.pos -= 1;
            s
        };
        match status {
            0xff => {
                running = None;
                let meta = cur.u8()?;
                let len = cur.vlq()? as usize;
                let data_at = cur.pos;
                let data = cur.take(len)?;
                match meta {
                    0x2f => {
                        saw_end = true;
                        break;
                    }
                    0x51 if len == 3 => {
                        if out.tempo_us_per_quarter.is_none() {
                            let us = (u32::from(data[0]) << 16) | (u32::from(data[1]) << 8) | u32::from(data[2]);
                            if us == 0 {
                                return Err(MidiParseError::new(data_at, "zero tempo"));
                            }
                            out.tempo_us_per_quarter = Some(us);
                        }
                    }
                    0x58 if len >= 2 => {
                        if out.time_signature.is_none() {
                            if data[1] > 7 {
                                return Err(MidiParseError::new(data_at + 1, "time signature denominator too large"));
                            }
                            out.time_signature = Some((data[0], 1u8 << data[1]));
                        }
                    }
                    0x59 if len == 2 && out.key_signature.is_none() => {
                        let fifths = data[0] as i8;
                        if !(-7..=7).contains(&fifths) || data[1] > 1 {
                            return Err(MidiParseError::new(data_at, "invalid key signature"));
                        }
                        out.key_signature = Some(KeySignature {
                            fifths,
                            minor: data[1] == 1,
                        });
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = cur.vlq()? as usize;
                cur.take(len)?;
            }
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                let kind = status & 0xf0;
                let data_len = if matches!(kind, 0xc0 | 0xd0) { 1 } else { 2 };
                let data_at = cur.pos;
                let data = cur.take(data_len)?;
                if data.iter().any(|b| b & 0x80 != 0) {
                    return Err(MidiParseError::new(data_at, "data byte has its high bit set"));
                }
                if channel == PERCUSSION_CHANNEL {
                    continue;
                }
                match (kind, data) {
                    (0x90, [pitch, velocity]) if *velocity > 0 => {
                        open.entry((channel, *pitch))
                            .or_default()
                            .push_back((tick, *velocity));
                    }
                    (0x80, [pitch, _]) | (0x90, [pitch, _]) => {
                        if let Some((on_tick, velocity)) = open
                            .get_mut(&(channel, *pitch))
                            .and_then(|q| q.pop_front())
                        {
                            out.notes.push(TimedNote {
                                start: on_tick,
                                end: tick.max(on_tick + 1),
                                pitch: *pitch,
                                velocity,
                            });
                        }
                    }
                    _ => {}
                }
            }
            other => {
                return Err(MidiParseError::new(status_at, format!("unexpected status byte 0x{other:02x}")));
            }
        }
    }
    if !saw_end {
        return Err(MidiParseError::new(cur.pos, "track ends without an end-of-track event"));
    }
    // Notes still sounding at the end of the track end there.
    let mut dangling: Vec<_> = open
        .into_iter()
        .flat_map(|((_, pitch), q)| q.into_iter().map(move |(on, vel)| (on, pitch, vel)))
        .collect();
    dangling.sort();
    for (on_tick, pitch, velocity) in dangling {
        out.notes.push(TimedNote {
            start: on_tick,
            end: tick.max(on_tick + 1),
            pitch,
            velocity,
        });
    }
    out.end_tick = out.end_tick.max(tick);
    Ok(())
}

fn write_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 5];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let continuation = if i > 0 { 0x80 } else { 0 };
        out.push(stack[i] | continuation);
    }
}

/// Serializes a prompt as a format-0 Standard MIDI File. Output depends
/// only on the prompt's content, never on provenance.
pub fn emit_midi(prompt: &SymbolicPrompt) -> Vec<u8> {
    let meter = prompt.meter();
    let key_sig = KeySignature::from_key(prompt.key());
    let us_per_quarter = (60_000_000.0 / f64::from(prompt.tempo_bpm())).round() as u32;

    // (tick, order, pitch, velocity): order 0 = note-off, 1 = note-on.
    let mut events: Vec<(u64, u8, u8, u8)> = Vec::with_capacity(prompt.note_count() * 2);
    for note in prompt.timed_notes() {
        events.push((note.start, 1, note.pitch, note.velocity));
        events.push((note.end, 0, note.pitch, 0x40));
    }
    events.sort_unstable();

    let mut track = Vec::with_capacity(32 + events.len() * 4);
    let denominator_pow = meter.denominator().trailing_zeros() as u8;
    let clocks_per_click = if meter == Meter::SixEight { 36 } else { 24 };
    track.extend_from_slice(&[
        0x00, 0xff, 0x58, 0x04,
        meter.numerator(), denominator_pow, clocks_per_click, 0x08,
    ]);
    track.extend_from_slice(&[0x00, 0xff, 0x59, 0x02, key_sig.fifths as u8, u8::from(key_sig.minor)]);
    track.extend_from_slice(&[
        0x00, 0xff, 0x51, 0x03,
        (us_per_quarter >> 16) as u8, (us_per_quarter >> 8) as u8, us_per_quarter as u8,
    ]);

    let mut last: u64 = 0;
    for (tick, order, pitch, velocity) in events {
        write_vlq(&mut track, (tick - last) as u32);
        last = tick;
        let status = if order == 0 { 0x80 } else { 0x90 };
        track.extend_from_slice(&[status, pitch, velocity]);
    }
    let end = prompt.total_ticks();
    write_vlq(&mut track, (end - last) as u32);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(TICKS_PER_QUARTER as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}
