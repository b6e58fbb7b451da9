//! Key estimation by correlating a duration-weighted pitch-class histogram
//! with the Krumhansl-Kessler major and minor profiles.

use crate::model::{Bar, Key, Mode, SymbolicPrompt};

use super::RefineError;

/// Krumhansl-Kessler major profile, tonic first.
pub const MAJOR_PROFILE: [f64; 12] = [
    6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88,
];

/// Krumhansl-Kessler minor profile, tonic first.
pub const MINOR_PROFILE: [f64; 12] = [
    6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17,
];

pub fn pitch_class_histogram(bars: &[Bar]) -> [f64; 12] {
    let mut histogram = [0.0; 12];
    for note in bars.iter().flatten() {
        histogram[usize::from(note.pitch % 12)] += f64::from(note.length);
    }
    histogram
}

fn pearson(x: &[f64; 12], y: &[f64; 12]) -> f64 {
    let mean_x = x.iter().sum::<f64>() / 12.0;
    let mean_y = y.iter().sum::<f64>() / 12.0;
    let (mut num, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        num += dx * dy;
        sx += dx * dx;
        sy += dy * dy;
    }
    let denom = (sx * sy).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        num / denom
    }
}

/// Correlation of the histogram with the profile of `key`.
pub fn key_correlation(histogram: &[f64; 12], key: Key) -> f64 {
    let profile = match key.mode {
        Mode::Major => &MAJOR_PROFILE,
        Mode::Minor => &MINOR_PROFILE,
    };
    let tonic = usize::from(key.tonic());
    let rotated: [f64; 12] = std::array::from_fn(|i| histogram[(i + tonic) % 12]);
    pearson(&rotated, profile)
}

/// Best-correlating key; ties go to the lower tonic, then major.
pub fn detect_key_in_bars(bars: &[Bar]) -> Result<Key, RefineError> {
    let histogram = pitch_class_histogram(bars);
    if histogram.iter().all(|&h| h == 0.0) {
        return Err(RefineError::EmptyPrompt);
    }
    let mut best = Key::C_MAJOR;
    let mut best_score = f64::NEG_INFINITY;
    for key in Key::all() {
        let score = key_correlation(&histogram, key);
        if score > best_score {
            best = key;
            best_score = score;
        }
    }
    Ok(best)
}

pub fn detect_key(prompt: &SymbolicPrompt) -> Result<Key, RefineError> {
    detect_key_in_bars(prompt.bars())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoteEvent;

    fn scale_bars(offset: u8) -> Vec<Bar> {
        let steps = [0u8, 2, 4, 5, 7, 9, 11, 12];
        vec![steps
            .iter()
            .enumerate()
            .map(|(i, s)| NoteEvent::new(60 + offset + s, i as u32 * 240, 240, 90))
            .collect()]
    }

    #[test]
    fn empty_material_is_an_error() {
        assert!(matches!(detect_key_in_bars(&[]), Err(RefineError::EmptyPrompt)));
        assert!(matches!(detect_key_in_bars(&[vec![]]), Err(RefineError::EmptyPrompt)));
    }

    #[test]
    fn flat_histogram_ties_to_c_major() {
        let bar: Bar = (0..12u8).map(|i| NoteEvent::new(60 + i, u32::from(i) * 100, 100, 80)).collect();
        assert_eq!(detect_key_in_bars(&[bar]).unwrap(), Key::C_MAJOR);
    }

    #[test]
    fn ascending_scales() {
        assert_eq!(detect_key_in_bars(&scale_bars(0)).unwrap(), Key::C_MAJOR);
        assert_eq!(detect_key_in_bars(&scale_bars(7)).unwrap(), Key::new(7, Mode::Major));
    }
}
