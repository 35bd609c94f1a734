//! Data augmentation: score-level pitch transposition and feature-space
//! mixup with Beta-distributed mixing weights.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::score::{NoteSequence, Pitch};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("mixup inputs differ in shape: {a:?} vs {b:?}")]
    ShapeMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
}

/// Augmentation knobs as they appear on the CLI and in config files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    /// Whole-semitone transposition in [-12, 12].
    pub pitch_shift_semitones: i32,
    /// Beta(α, α) parameter for mixup weights; > 0.
    pub mixup_alpha: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            pitch_shift_semitones: 0,
            mixup_alpha: 0.5,
            seed: 0,
        }
    }
}

/// Transposes every pitched note by `semitones`, clamping to the MIDI
/// range. Rests, timing, tempo, and beat positions pass through untouched.
pub fn pitch_shift_score(notes: &NoteSequence, semitones: i32) -> NoteSequence {
    let events = notes
        .events
        .iter()
        .map(|e| {
            let pitch = match e.pitch {
                Pitch::Rest => Pitch::Rest,
                Pitch::Note(n) => Pitch::Note((n as i32 + semitones).clamp(0, 127) as u8),
            };
            crate::score::NoteEvent { pitch, ..*e }
        })
        .collect();
    NoteSequence {
        events,
        total_s: notes.total_s,
    }
}

/// Elementwise λ·a + (1−λ)·b over two equal-shape feature matrices.
pub fn mixup_features(
    a: &Array2<f64>,
    b: &Array2<f64>,
    lambda: f64,
) -> Result<Array2<f64>, AugmentError> {
    if a.dim() != b.dim() {
        return Err(AugmentError::ShapeMismatch {
            a: a.dim(),
            b: b.dim(),
        });
    }
    Ok(lambda * a + (1.0 - lambda) * b)
}

/// Draws a mixup weight from Beta(α, α) as g₁/(g₁+g₂) with gᵢ ~ Gamma(α, 1).
/// Deterministic for a given RNG state. α must be positive.
pub fn sample_lambda<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(alpha, 1.0).expect("mixup alpha must be positive and finite");
    let g1: f64 = gamma.sample(rng);
    let g2: f64 = gamma.sample(rng);
    let total = g1 + g2;
    if total > 0.0 {
        g1 / total
    } else {
        // Both draws underflowed to zero (can happen for very small α).
        0.5
    }
}
