//! The closed attribute vocabulary.
//!
//! Nine attribute ids, each with an enumerated (or bounded) value domain.
//! Values are equality-comparable so that retrieval can use indicator
//! matching; [`AttributeValue::match_key`] gives the key used for that.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Ticks per quarter note used by every prompt.
pub const TICKS_PER_QUARTER: u32 = 480;

/// Inclusive tempo bounds in beats per minute.
pub const MIN_BPM: u16 = 40;
pub const MAX_BPM: u16 = 240;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{value:?} is not a legal value for {id}: {reason}")]
pub struct DomainError {
    pub id: String,
    pub value: String,
    pub reason: String,
}

impl DomainError {
    fn new(id: impl Into<String>, value: impl Into<String>, reason: impl Into<String>) -> Self {
        DomainError {
            id: id.into(),
            value: value.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeClass {
    /// Affect and style labels (mood, genre, timbre).
    Descriptive,
    /// Piece-wide parameters (key, tempo, meter).
    Global,
    /// Bar-level material (rhythm, chords, density).
    Local,
}

impl AttributeClass {
    pub fn default_weight(self) -> f64 {
        match self {
            AttributeClass::Global => 1.0,
            AttributeClass::Local => 0.75,
            AttributeClass::Descriptive => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeClass::Descriptive => "descriptive",
            AttributeClass::Global => "global",
            AttributeClass::Local => "local",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeId {
    Mood,
    Genre,
    Timbre,
    Key,
    Tempo,
    Meter,
    RhythmPattern,
    ChordProgression,
    Density,
}

impl AttributeId {
    pub const ALL: [AttributeId; 9] = [
        AttributeId::Mood,
        AttributeId::Genre,
        AttributeId::Timbre,
        AttributeId::Key,
        AttributeId::Tempo,
        AttributeId::Meter,
        AttributeId::RhythmPattern,
        AttributeId::ChordProgression,
        AttributeId::Density,
    ];

    pub fn class(self) -> AttributeClass {
        match self {
            AttributeId::Mood | AttributeId::Genre | AttributeId::Timbre => {
                AttributeClass::Descriptive
            }
            AttributeId::Key | AttributeId::Tempo | AttributeId::Meter => AttributeClass::Global,
            AttributeId::RhythmPattern | AttributeId::ChordProgression | AttributeId::Density => {
                AttributeClass::Local
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeId::Mood => "mood",
            AttributeId::Genre => "genre",
            AttributeId::Timbre => "timbre",
            AttributeId::Key => "key",
            AttributeId::Tempo => "tempo",
            AttributeId::Meter => "meter",
            AttributeId::RhythmPattern => "rhythm_pattern",
            AttributeId::ChordProgression => "chord_progression",
            AttributeId::Density => "density",
        }
    }

    /// Human-readable label used in explanations and questions.
    pub fn label(self) -> &'static str {
        match self {
            AttributeId::RhythmPattern => "rhythm pattern",
            AttributeId::ChordProgression => "chord progression",
            other => other.as_str(),
        }
    }

    /// Every legal value of this id, in canonical order. Tempo is bounded
    /// rather than enumerated, so one representative per bucket is listed.
    pub fn domain(self) -> Vec<AttributeValue> {
        match self {
            AttributeId::Mood => Mood::ALL.iter().copied().map(AttributeValue::Mood).collect(),
            AttributeId::Genre => Genre::ALL.iter().copied().map(AttributeValue::Genre).collect(),
            AttributeId::Timbre => Timbre::ALL.iter().copied().map(AttributeValue::Timbre).collect(),
            AttributeId::Key => Key::all().into_iter().map(AttributeValue::Key).collect(),
            AttributeId::Tempo => TempoBucket::ALL
                .iter()
                .map(|b| AttributeValue::Tempo(Tempo::from_bucket(*b)))
                .collect(),
            AttributeId::Meter => Meter::ALL.iter().copied().map(AttributeValue::Meter).collect(),
            AttributeId::RhythmPattern => RhythmPattern::ALL
                .iter()
                .copied()
                .map(AttributeValue::RhythmPattern)
                .collect(),
            AttributeId::ChordProgression => ChordProgression::ALL
                .iter()
                .copied()
                .map(AttributeValue::ChordProgression)
                .collect(),
            AttributeId::Density => Density::ALL
                .iter()
                .copied()
                .map(AttributeValue::Density)
                .collect(),
        }
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttributeId {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributeId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| DomainError::new("attribute id", s, "unknown attribute id"))
    }
}

/// Declares a plain string-valued enumeration with snake_case wire names.
macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $id:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = DomainError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let wanted = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == wanted)
                    .ok_or_else(|| DomainError::new($id, s, "not in the value domain"))
            }
        }
    };
}

string_enum!(Mood, "mood" {
    Happy => "happy",
    Excited => "excited",
    Sad => "sad",
    Calm => "calm",
    Melancholic => "melancholic",
    Hopeful => "hopeful",
    Tense => "tense",
    Playful => "playful",
    Mysterious => "mysterious",
    Romantic => "romantic",
});

string_enum!(Genre, "genre" {
    Pop => "pop",
    Rock => "rock",
    Jazz => "jazz",
    Classical => "classical",
    Folk => "folk",
    Electronic => "electronic",
    Blues => "blues",
    HipHop => "hip_hop",
    Ambient => "ambient",
    Film => "film",
});

string_enum!(Timbre, "timbre" {
    Piano => "piano",
    Strings => "strings",
    Guitar => "guitar",
    Synth => "synth",
    Brass => "brass",
    Woodwind => "woodwind",
    Bright => "bright",
    Warm => "warm",
    Dark => "dark",
});

string_enum!(RhythmPattern, "rhythm_pattern" {
    Straight => "straight",
    Swing => "swing",
    Staccato => "staccato",
});

string_enum!(Density, "density" {
    Sparse => "sparse",
    Medium => "medium",
    Dense => "dense",
});

string_enum!(TempoBucket, "tempo bucket" {
    Slow => "slow",
    Medium => "medium",
    Fast => "fast",
});

impl TempoBucket {
    pub fn for_bpm(bpm: u16) -> TempoBucket {
        match bpm {
            0..=89 => TempoBucket::Slow,
            90..=119 => TempoBucket::Medium,
            _ => TempoBucket::Fast,
        }
    }

    /// Representative bpm used when only a bucket is known.
    pub fn default_bpm(self) -> u16 {
        match self {
            TempoBucket::Slow => 72,
            TempoBucket::Medium => 100,
            TempoBucket::Fast => 132,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tempo {
    pub bpm: u16,
    pub bucket: TempoBucket,
}

impl Tempo {
    pub fn new(bpm: u16) -> Result<Tempo, DomainError> {
        if !(MIN_BPM..=MAX_BPM).contains(&bpm) {
            return Err(DomainError::new(
                "tempo",
                bpm.to_string(),
                format!("bpm must lie in {MIN_BPM}..={MAX_BPM}"),
            ));
        }
        Ok(Tempo {
            bpm,
            bucket: TempoBucket::for_bpm(bpm),
        })
    }

    pub fn from_bucket(bucket: TempoBucket) -> Tempo {
        Tempo {
            bpm: bucket.default_bpm(),
            bucket,
        }
    }

    pub fn check(&self) -> Result<(), DomainError> {
        let fresh = Tempo::new(self.bpm)?;
        if fresh.bucket != self.bucket {
            return Err(DomainError::new(
                "tempo",
                format!("{} bpm / {}", self.bpm, self.bucket),
                format!("{} bpm belongs to the {} bucket", self.bpm, fresh.bucket),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Tempo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bpm ({})", self.bpm, self.bucket)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Major,
    Minor,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::Major => Mode::Minor,
            Mode::Minor => Mode::Major,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const PITCH_CLASS_NAMES: [&str; 12] = [
    "C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B",
];

/// Parses a tonic spelling such as `C`, `f#`, `Bb`, `E flat`, `C sharp`.
pub fn parse_pitch_class(s: &str) -> Option<u8> {
    let s = s.trim();
    let mut chars = s.chars();
    let letter = chars.next()?.to_ascii_uppercase();
    let natural: i32 = match letter {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let rest = chars.as_str().trim().to_ascii_lowercase();
    let accidental = match rest.as_str() {
        "" => 0,
        "#" | "♯" | "sharp" | "-sharp" => 1,
        "b" | "♭" | "flat" | "-flat" => -1,
        _ => return None,
    };
    Some((natural + accidental).rem_euclid(12) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key {
    tonic: u8,
    pub mode: Mode,
}

impl Key {
    pub fn new(tonic: u8, mode: Mode) -> Key {
        Key {
            tonic: tonic % 12,
            mode,
        }
    }

    pub const C_MAJOR: Key = Key {
        tonic: 0,
        mode: Mode::Major,
    };
    pub const A_MINOR: Key = Key {
        tonic: 9,
        mode: Mode::Minor,
    };

    /// Tonic pitch class, 0 = C.
    pub fn tonic(&self) -> u8 {
        self.tonic
    }

    /// All 24 keys, majors before minors within each tonic.
    pub fn all() -> Vec<Key> {
        (0..12u8)
            .flat_map(|t| [Key::new(t, Mode::Major), Key::new(t, Mode::Minor)])
            .collect()
    }

    pub fn with_mode(self, mode: Mode) -> Key {
        Key { mode, ..self }
    }

    /// Pitch classes of the key's diatonic scale (natural minor for minor keys).
    pub fn scale(&self) -> [u8; 7] {
        let steps: [u8; 7] = match self.mode {
            Mode::Major => [0, 2, 4, 5, 7, 9, 11],
            Mode::Minor => [0, 2, 3, 5, 7, 8, 10],
        };
        steps.map(|s| (self.tonic + s) % 12)
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", PITCH_CLASS_NAMES[self.tonic as usize], self.mode)
    }
}

impl FromStr for Key {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| DomainError::new("key", s, reason);
        let lower = s.trim().to_ascii_lowercase();
        let (tonic_part, mode) = if let Some(rest) = lower.strip_suffix("major") {
            (rest, Mode::Major)
        } else if let Some(rest) = lower.strip_suffix("minor") {
            (rest, Mode::Minor)
        } else {
            return Err(bad("expected '<tonic> major' or '<tonic> minor'"));
        };
        let tonic_part = tonic_part.trim();
        let tonic = parse_pitch_class(tonic_part).ok_or_else(|| bad("unknown tonic"))?;
        Ok(Key::new(tonic, mode))
    }
}

impl Serialize for Key {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Key {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Meter {
    TwoFour,
    ThreeFour,
    FourFour,
    SixEight,
}

impl Meter {
    pub const ALL: &'static [Meter] = &[
        Meter::TwoFour,
        Meter::ThreeFour,
        Meter::FourFour,
        Meter::SixEight,
    ];

    pub fn from_signature(numerator: u8, denominator: u8) -> Option<Meter> {
        match (numerator, denominator) {
            (2, 4) => Some(Meter::TwoFour),
            (3, 4) => Some(Meter::ThreeFour),
            (4, 4) => Some(Meter::FourFour),
            (6, 8) => Some(Meter::SixEight),
            _ => None,
        }
    }

    pub fn numerator(self) -> u8 {
        match self {
            Meter::TwoFour => 2,
            Meter::ThreeFour => 3,
            Meter::FourFour => 4,
            Meter::SixEight => 6,
        }
    }

    pub fn denominator(self) -> u8 {
        match self {
            Meter::SixEight => 8,
            _ => 4,
        }
    }

    pub fn ticks_per_bar(self) -> u32 {
        u32::from(self.numerator()) * TICKS_PER_QUARTER * 4 / u32::from(self.denominator())
    }

    /// Number of quarter-note beats per bar (6/8 counts as three quarters).
    pub fn quarters_per_bar(self) -> f64 {
        f64::from(self.ticks_per_bar()) / f64::from(TICKS_PER_QUARTER)
    }
}

impl fmt::Display for Meter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator(), self.denominator())
    }
}

impl FromStr for Meter {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::new("meter", s, "supported meters are 2/4, 3/4, 4/4, 6/8");
        let (n, d) = s.trim().split_once('/').ok_or_else(bad)?;
        let n: u8 = n.trim().parse().map_err(|_| bad())?;
        let d: u8 = d.trim().parse().map_err(|_| bad())?;
        Meter::from_signature(n, d).ok_or_else(bad)
    }
}

impl Serialize for Meter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Meter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Chord quality implied by a roman numeral's case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChordQuality {
    Major,
    Minor,
}

/// One roman numeral: root offset in semitones above the key tonic plus quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Numeral {
    pub symbol: &'static str,
    pub root_offset: u8,
    pub quality: ChordQuality,
}

const fn numeral(symbol: &'static str, root_offset: u8, quality: ChordQuality) -> Numeral {
    Numeral {
        symbol,
        root_offset,
        quality,
    }
}

pub const NUMERALS: [Numeral; 12] = [
    numeral("I", 0, ChordQuality::Major),
    numeral("i", 0, ChordQuality::Minor),
    numeral("ii", 2, ChordQuality::Minor),
    numeral("III", 3, ChordQuality::Major),
    numeral("iii", 4, ChordQuality::Minor),
    numeral("IV", 5, ChordQuality::Major),
    numeral("iv", 5, ChordQuality::Minor),
    numeral("V", 7, ChordQuality::Major),
    numeral("v", 7, ChordQuality::Minor),
    numeral("VI", 8, ChordQuality::Major),
    numeral("vi", 9, ChordQuality::Minor),
    numeral("VII", 10, ChordQuality::Major),
];

pub fn lookup_numeral(symbol: &str) -> Option<Numeral> {
    NUMERALS.iter().copied().find(|n| n.symbol == symbol)
}

pub fn numeral_for(root_offset: u8, quality: ChordQuality) -> Option<Numeral> {
    NUMERALS
        .iter()
        .copied()
        .find(|n| n.root_offset == root_offset % 12 && n.quality == quality)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChordProgression {
    OneFourFiveOne,
    OneFiveSixFour,
    OneSixFourFive,
    SixFourOneFive,
    TwoFiveOne,
    MinorOneFourFiveOne,
    MinorOneSixThreeSeven,
    MinorOneSevenSixSeven,
}

impl ChordProgression {
    pub const ALL: &'static [ChordProgression] = &[
        ChordProgression::OneFourFiveOne,
        ChordProgression::OneFiveSixFour,
        ChordProgression::OneSixFourFive,
        ChordProgression::SixFourOneFive,
        ChordProgression::TwoFiveOne,
        ChordProgression::MinorOneFourFiveOne,
        ChordProgression::MinorOneSixThreeSeven,
        ChordProgression::MinorOneSevenSixSeven,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChordProgression::OneFourFiveOne => "I-IV-V-I",
            ChordProgression::OneFiveSixFour => "I-V-vi-IV",
            ChordProgression::OneSixFourFive => "I-vi-IV-V",
            ChordProgression::SixFourOneFive => "vi-IV-I-V",
            ChordProgression::TwoFiveOne => "ii-V-I",
            ChordProgression::MinorOneFourFiveOne => "i-iv-v-i",
            ChordProgression::MinorOneSixThreeSeven => "i-VI-III-VII",
            ChordProgression::MinorOneSevenSixSeven => "i-VII-VI-VII",
        }
    }

    pub fn numerals(self) -> Vec<Numeral> {
        self.as_str()
            .split('-')
            .map(|s| lookup_numeral(s).expect("progression tables only use known numerals"))
            .collect()
    }
}

impl fmt::Display for ChordProgression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChordProgression {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted: String = s.split_whitespace().collect::<Vec<_>>().join("");
        ChordProgression::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == wanted)
            .ok_or_else(|| DomainError::new("chord_progression", s, "not in the value domain"))
    }
}

impl Serialize for ChordProgression {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ChordProgression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A value from one attribute's domain. The variant determines the id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "id", content = "value", rename_all = "snake_case")]
pub enum AttributeValue {
    Mood(Mood),
    Genre(Genre),
    Timbre(Timbre),
    Key(Key),
    Tempo(Tempo),
    Meter(Meter),
    RhythmPattern(RhythmPattern),
    ChordProgression(ChordProgression),
    Density(Density),
}

impl AttributeValue {
    pub fn id(&self) -> AttributeId {
        match self {
            AttributeValue::Mood(_) => AttributeId::Mood,
            AttributeValue::Genre(_) => AttributeId::Genre,
            AttributeValue::Timbre(_) => AttributeId::Timbre,
            AttributeValue::Key(_) => AttributeId::Key,
            AttributeValue::Tempo(_) => AttributeId::Tempo,
            AttributeValue::Meter(_) => AttributeId::Meter,
            AttributeValue::RhythmPattern(_) => AttributeId::RhythmPattern,
            AttributeValue::ChordProgression(_) => AttributeId::ChordProgression,
            AttributeValue::Density(_) => AttributeId::Density,
        }
    }

    /// Equality key for retrieval: tempo compares by bucket, everything
    /// else by exact value.
    pub fn match_key(&self) -> String {
        match self {
            AttributeValue::Tempo(t) => t.bucket.as_str().to_string(),
            other => other.to_string(),
        }
    }

    pub fn matches(&self, other: &AttributeValue) -> bool {
        self.id() == other.id() && self.match_key() == other.match_key()
    }

    /// Checks the bounded parts of the domain that the type cannot encode.
    pub fn check(&self) -> Result<(), DomainError> {
        match self {
            AttributeValue::Tempo(t) => t.check(),
            _ => Ok(()),
        }
    }

    /// The bare value encoding, without the id tag.
    pub fn value_json(&self) -> serde_json::Value {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(mut map)) => map.remove("value").unwrap_or_default(),
            _ => serde_json::Value::Null,
        }
    }

    /// Decodes a bare value for `id`, also accepting a plain bpm number
    /// or bucket name for tempo.
    pub fn from_json(id: AttributeId, value: &serde_json::Value) -> Result<AttributeValue, DomainError> {
        let shown = value.to_string();
        if id == AttributeId::Tempo {
            match value {
                serde_json::Value::Number(n) => {
                    let bpm = n
                        .as_u64()
                        .and_then(|b| u16::try_from(b).ok())
                        .ok_or_else(|| DomainError::new("tempo", &shown, "bpm must be an integer"))?;
                    return Tempo::new(bpm).map(AttributeValue::Tempo);
                }
                serde_json::Value::String(s) => {
                    let bucket: TempoBucket = s.parse()?;
                    return Ok(AttributeValue::Tempo(Tempo::from_bucket(bucket)));
                }
                _ => {}
            }
        }
        let tagged = serde_json::json!({ "id": id.as_str(), "value": value });
        let parsed: AttributeValue = serde_json::from_value(tagged)
            .map_err(|e| DomainError::new(id.as_str(), &shown, e.to_string()))?;
        parsed.check()?;
        Ok(parsed)
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Mood(v) => v.fmt(f),
            AttributeValue::Genre(v) => v.fmt(f),
            AttributeValue::Timbre(v) => v.fmt(f),
            AttributeValue::Key(v) => v.fmt(f),
            AttributeValue::Tempo(v) => v.fmt(f),
            AttributeValue::Meter(v) => v.fmt(f),
            AttributeValue::RhythmPattern(v) => v.fmt(f),
            AttributeValue::ChordProgression(v) => v.fmt(f),
            AttributeValue::Density(v) => v.fmt(f),
        }
    }
}
