//! Score featurization: frame-level and syllable-level id sequences,
//! duration utilities (length regulation, rule-based phoneme durations,
//! even syllable splitting), and equal-temperament pitch conversion.

use ndarray::Array2;
use thiserror::Error;

use crate::corpus::TokenList;
use crate::dsp::FrameParams;
use crate::score::{LabelEntry, LabelSequence, NoteSequence, Pitch};

#[derive(Debug, Error)]
pub enum FeaturizeError {
    #[error("a rest has no pitch")]
    RestHasNoPitch,
    #[error("cannot featurize an empty label sequence")]
    EmptyLabels,
    #[error("label entry {0} overlaps no note")]
    NoOverlappingNote(usize),
    #[error("{units} label entries cannot fit in {frames} frames")]
    TooManyUnits { units: usize, frames: usize },
    #[error("group {group}: note shorter than its phoneme count")]
    NoteTooShort { group: usize },
}

/// Frame-aligned id sequences: one (phoneme, note) pair per acoustic frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameFeatures {
    pub phoneme_ids: Vec<u32>,
    pub note_ids: Vec<u32>,
}

impl FrameFeatures {
    pub fn len(&self) -> usize {
        self.phoneme_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phoneme_ids.is_empty()
    }

    /// Frames×2 matrix (phoneme id, note id) for the float feature dump.
    pub fn to_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), 2));
        for (t, (&p, &n)) in self.phoneme_ids.iter().zip(&self.note_ids).enumerate() {
            m[(t, 0)] = p as f64;
            m[(t, 1)] = n as f64;
        }
        m
    }
}

/// One syllable-level unit: ids plus tempo/beat context and a frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct SyllableUnit {
    pub phoneme_id: u32,
    pub note_id: u32,
    pub tempo_bpm: f64,
    pub beat_pos: f64,
    pub duration_frames: usize,
}

/// Unit records whose durations sum to the paired audio's frame count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyllableFeatures {
    pub units: Vec<SyllableUnit>,
}

impl SyllableFeatures {
    pub fn total_frames(&self) -> usize {
        self.units.iter().map(|u| u.duration_frames).sum()
    }
}

/// Equal-temperament frequency of a MIDI pitch: 440·2^((m−69)/12).
pub fn midi_to_hz(pitch: Pitch) -> Result<f64, FeaturizeError> {
    match pitch {
        Pitch::Rest => Err(FeaturizeError::RestHasNoPitch),
        Pitch::Note(m) => Ok(440.0 * ((m as f64 - 69.0) / 12.0).exp2()),
    }
}

/// Inverse of `midi_to_hz` on positive frequencies: 69 + 12·log2(f/440).
/// Returns a real-valued (unrounded, unclamped) note number.
pub fn hz_to_midi(f_hz: f64) -> f64 {
    69.0 + 12.0 * (f_hz / 440.0).log2()
}

/// Expands label entries to one id per sample. Samples before the first
/// entry take the first id; samples in gaps and past the last entry hold
/// the most recent id.
fn expand_to_samples<T: Copy>(
    spans: &[(f64, T)], // (start_s, id), sorted by start
    audio_len: usize,
    sample_rate_hz: u32,
) -> Vec<T> {
    let sr = sample_rate_hz as f64;
    let mut out = Vec::with_capacity(audio_len);
    let mut cursor = 0usize;
    for s in 0..audio_len {
        let t = s as f64 / sr;
        while cursor + 1 < spans.len() && spans[cursor + 1].0 <= t {
            cursor += 1;
        }
        out.push(spans[cursor].1);
    }
    out
}

/// Majority id over `window[lo..hi)`, ties broken toward the id seen
/// earliest in the window (i.e. the earlier-starting entry).
fn window_majority(ids: &[u32]) -> u32 {
    let mut tally: Vec<(u32, usize, usize)> = Vec::new(); // (id, count, first_pos)
    for (pos, &id) in ids.iter().enumerate() {
        match tally.iter_mut().find(|(i, _, _)| *i == id) {
            Some((_, count, _)) => *count += 1,
            None => tally.push((id, 1, pos)),
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
        .map(|(id, _, _)| id)
        .expect("window_majority called on an empty window")
}

/// Builds the frame-level representation: label and note ids are expanded
/// to the sampling rate over `audio_len` samples, then aggregated per frame
/// by majority vote over the sliding window `[t·hop, t·hop + win)`. The
/// output has `1 + audio_len/hop` frames — the same count `logmel` yields
/// for that audio.
pub fn frame_level_features(
    labels: &LabelSequence,
    notes: &NoteSequence,
    tl: &TokenList,
    audio_len: usize,
    p: &FrameParams,
) -> Result<FrameFeatures, FeaturizeError> {
    if labels.entries.is_empty() {
        return Err(FeaturizeError::EmptyLabels);
    }
    let label_spans: Vec<(f64, u32)> = labels
        .entries
        .iter()
        .map(|e| (e.start_s, tl.token_to_id(&e.phoneme) as u32))
        .collect();
    let note_spans: Vec<(f64, u32)> = if notes.events.is_empty() {
        vec![(0.0, crate::score::REST_NOTE_ID)]
    } else {
        notes
            .events
            .iter()
            .map(|e| (e.onset_s, e.pitch.note_id()))
            .collect()
    };
    let phon = expand_to_samples(&label_spans, audio_len, p.sample_rate_hz);
    let note = expand_to_samples(&note_spans, audio_len, p.sample_rate_hz);

    let n_frames = p.n_frames(audio_len);
    let mut phoneme_ids = Vec::with_capacity(n_frames);
    let mut note_ids = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let lo = t * p.hop_length;
        let hi = (lo + p.win_length).min(audio_len);
        if lo < hi {
            phoneme_ids.push(window_majority(&phon[lo..hi]));
            note_ids.push(window_majority(&note[lo..hi]));
        } else {
            // Window past the end of the audio: hold the final ids.
            phoneme_ids.push(phon.last().copied().unwrap_or(label_spans[0].1));
            note_ids.push(note.last().copied().unwrap_or(note_spans[0].1));
        }
    }
    Ok(FrameFeatures {
        phoneme_ids,
        note_ids,
    })
}

/// Builds the syllable-level representation: one unit per label entry,
/// taking pitch/tempo/beat from the note with maximal temporal overlap.
/// Durations come from boundary rounding `round(end·sr/hop) −
/// round(start·sr/hop)`; the final entry absorbs the difference so that
/// durations sum exactly to the frame count of `audio_len` samples, and
/// zero-rounded entries take one frame from their largest neighbor.
pub fn syllable_level_features(
    labels: &LabelSequence,
    notes: &NoteSequence,
    tl: &TokenList,
    audio_len: usize,
    p: &FrameParams,
) -> Result<SyllableFeatures, FeaturizeError> {
    if labels.entries.is_empty() {
        return Err(FeaturizeError::EmptyLabels);
    }
    let n_frames = p.n_frames(audio_len);
    let n = labels.entries.len();
    if n_frames < n {
        return Err(FeaturizeError::TooManyUnits {
            units: n,
            frames: n_frames,
        });
    }

    let frames_per_s = p.sample_rate_hz as f64 / p.hop_length as f64;
    let mut durations: Vec<i64> = Vec::with_capacity(n);
    let mut context: Vec<(u32, f64, f64)> = Vec::with_capacity(n);
    for (i, e) in labels.entries.iter().enumerate() {
        // Note with the largest overlap; the earliest wins a tie.
        let mut best: Option<(f64, &crate::score::NoteEvent)> = None;
        for ev in &notes.events {
            let overlap = ev.offset_s.min(e.end_s) - ev.onset_s.max(e.start_s);
            if overlap > 0.0 && best.is_none_or(|(b, _)| overlap > b) {
                best = Some((overlap, ev));
            }
        }
        let (_, ev) = best.ok_or(FeaturizeError::NoOverlappingNote(i))?;
        context.push((ev.pitch.note_id(), ev.tempo_bpm, ev.beat_pos));
        durations.push(
            (e.end_s * frames_per_s).round() as i64 - (e.start_s * frames_per_s).round() as i64,
        );
    }

    // Force the final entry so the telescoped sum hits the frame count.
    let prefix: i64 = durations[..n - 1].iter().sum();
    durations[n - 1] = n_frames as i64 - prefix;

    // Give every zero (or negative) entry a frame, taken from a donor that
    // stays ≥ 1: the larger neighbor when one qualifies, else the largest
    // entry overall. Each transfer shrinks the total deficit, so this
    // terminates; the sum is untouched.
    while let Some(i) = durations.iter().position(|&d| d < 1) {
        let left = i.checked_sub(1).filter(|&j| durations[j] > 1);
        let right = (i + 1 < n).then_some(i + 1).filter(|&j| durations[j] > 1);
        let donor = match (left, right) {
            (Some(l), Some(r)) => {
                if durations[r] > durations[l] {
                    r
                } else {
                    l
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => {
                let (j, _) = durations
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                    .expect("nonempty durations");
                j
            }
        };
        durations[donor] -= 1;
        durations[i] += 1;
    }

    let units = labels
        .entries
        .iter()
        .zip(context)
        .zip(durations)
        .map(|((e, (note_id, tempo_bpm, beat_pos)), d)| SyllableUnit {
            phoneme_id: tl.token_to_id(&e.phoneme) as u32,
            note_id,
            tempo_bpm,
            beat_pos,
            duration_frames: d as usize,
        })
        .collect();
    Ok(SyllableFeatures { units })
}

/// Expands unit-level ids to frame level by repeating each unit
/// `duration_frames` times, in order.
pub fn length_regulate(units: &SyllableFeatures) -> FrameFeatures {
    let total = units.total_frames();
    let mut phoneme_ids = Vec::with_capacity(total);
    let mut note_ids = Vec::with_capacity(total);
    for u in &units.units {
        phoneme_ids.extend(std::iter::repeat_n(u.phoneme_id, u.duration_frames));
        note_ids.extend(std::iter::repeat_n(u.note_id, u.duration_frames));
    }
    FrameFeatures {
        phoneme_ids,
        note_ids,
    }
}

/// Distributes each note's frame budget over its phonemes: every non-final
/// phoneme gets `min(consonant_frames, floor(budget/count))` and the final
/// phoneme (the nucleus) takes the remainder. Per-group sums are exact and
/// every duration is ≥ 1.
pub fn rule_based_durations(
    labels_per_note: &[(Vec<String>, usize)],
    consonant_frames: usize,
) -> Result<Vec<Vec<usize>>, FeaturizeError> {
    let mut out = Vec::with_capacity(labels_per_note.len());
    for (group, (phonemes, frames)) in labels_per_note.iter().enumerate() {
        let k = phonemes.len();
        if k == 0 || *frames < k {
            return Err(FeaturizeError::NoteTooShort { group });
        }
        let each = consonant_frames.min(frames / k).max(1);
        let mut durs = vec![each; k];
        durs[k - 1] = frames - each * (k - 1);
        out.push(durs);
    }
    Ok(out)
}

/// Partitions one syllable-level label span evenly across its phonemes.
/// Boundaries sit at `start + k·(end−start)/n`; the final end is exactly
/// the original end.
pub fn split_syllable_evenly(entry: &LabelEntry, phonemes: &[String]) -> LabelSequence {
    let n = phonemes.len();
    if n == 0 {
        return LabelSequence::default();
    }
    let span = entry.end_s - entry.start_s;
    let mut entries = Vec::with_capacity(n);
    for (k, p) in phonemes.iter().enumerate() {
        let start_s = entry.start_s + k as f64 * span / n as f64;
        let end_s = if k + 1 == n {
            entry.end_s
        } else {
            entry.start_s + (k + 1) as f64 * span / n as f64
        };
        entries.push(LabelEntry {
            phoneme: p.clone(),
            start_s,
            end_s,
        });
    }
    LabelSequence { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_token_list;
    use crate::score::{NoteEvent, REST_NOTE_ID};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn label(ph: &str, start: f64, end: f64) -> LabelEntry {
        LabelEntry {
            phoneme: ph.to_string(),
            start_s: start,
            end_s: end,
        }
    }

    fn note(pitch: Pitch, onset: f64, offset: f64) -> NoteEvent {
        NoteEvent {
            pitch,
            onset_s: onset,
            offset_s: offset,
            tempo_bpm: 120.0,
            beat_pos: 0.0,
        }
    }

    fn token_list(phonemes: &[&str]) -> TokenList {
        let entries = phonemes
            .iter()
            .enumerate()
            .map(|(i, p)| label(p, i as f64, i as f64 + 1.0))
            .collect();
        let corpus = crate::corpus::Corpus {
            split_name: "train".into(),
            utterances: vec![crate::corpus::Utterance {
                utt_id: "u".into(),
                audio_ref: String::new(),
                midi_ref: String::new(),
                labels: LabelSequence { entries },
                singer_id: "s".into(),
                lang_id: "l".into(),
            }],
            ..Default::default()
        };
        build_token_list(&[corpus]).unwrap()
    }

    mod pitch_conversion {
        use super::*;

        #[test]
        fn concert_a_is_exact() {
            assert_eq!(midi_to_hz(Pitch::Note(69)).unwrap(), 440.0);
            assert_eq!(midi_to_hz(Pitch::Note(81)).unwrap(), 880.0);
        }

        #[test]
        fn middle_c_frequency() {
            assert_relative_eq!(hz_to_midi(261.6256), 60.0, epsilon = 1e-3);
        }

        #[test]
        fn rest_has_no_frequency() {
            assert!(matches!(
                midi_to_hz(Pitch::Rest),
                Err(FeaturizeError::RestHasNoPitch)
            ));
        }

        #[test]
        fn round_trip_is_tight_over_the_midi_range() {
            for m in 0..=127u8 {
                let back = hz_to_midi(midi_to_hz(Pitch::Note(m)).unwrap());
                assert!((back - m as f64).abs() <= 1e-9, "pitch {m}: got {back}");
            }
        }
    }

    mod frame_level {
        use super::*;

        #[test]
        fn two_label_example() {
            // 1 "second" of audio at a toy rate of 8 Hz; hop 2, win 4.
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a", "i"]);
            let labels = LabelSequence {
                entries: vec![label("a", 0.0, 0.5), label("i", 0.5, 1.0)],
            };
            let notes = crate::score::normalize_score(&NoteSequence {
                events: vec![note(Pitch::Note(60), 0.0, 1.0)],
                total_s: 1.0,
            });
            let ff = frame_level_features(&labels, &notes, &tl, 8, &p).unwrap();
            let a = tl.token_to_id("a") as u32;
            let i = tl.token_to_id("i") as u32;
            assert_eq!(ff.phoneme_ids, vec![a, a, i, i, i]);
            assert_eq!(ff.note_ids, vec![60; 5]);
        }

        #[test]
        fn single_label_gives_constant_ids() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a"]);
            let labels = LabelSequence {
                entries: vec![label("a", 0.0, 2.0)],
            };
            let notes = NoteSequence {
                events: vec![note(Pitch::Note(72), 0.0, 2.0)],
                total_s: 2.0,
            };
            let ff = frame_level_features(&labels, &notes, &tl, 16, &p).unwrap();
            assert_eq!(ff.len(), 9);
            assert!(ff
                .phoneme_ids
                .iter()
                .all(|&id| id == tl.token_to_id("a") as u32));
            assert!(ff.note_ids.iter().all(|&id| id == 72));
        }

        #[test]
        fn rest_notes_use_the_rest_id() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a"]);
            let labels = LabelSequence {
                entries: vec![label("a", 0.0, 1.0)],
            };
            let notes = NoteSequence {
                events: vec![note(Pitch::Rest, 0.0, 1.0)],
                total_s: 1.0,
            };
            let ff = frame_level_features(&labels, &notes, &tl, 8, &p).unwrap();
            assert!(ff.note_ids.iter().all(|&id| id == REST_NOTE_ID));
        }

        #[test]
        fn empty_labels_are_rejected() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a"]);
            assert!(matches!(
                frame_level_features(
                    &LabelSequence::default(),
                    &NoteSequence::default(),
                    &tl,
                    8,
                    &p
                ),
                Err(FeaturizeError::EmptyLabels)
            ));
        }

        #[test]
        fn matches_logmel_frame_count() {
            let p = FrameParams::with_defaults(24000);
            let tl = token_list(&["a"]);
            let labels = LabelSequence {
                entries: vec![label("a", 0.0, 0.7)],
            };
            let notes = NoteSequence {
                events: vec![note(Pitch::Note(60), 0.0, 0.7)],
                total_s: 0.7,
            };
            for len in [1usize, 255, 256, 4096, 12345] {
                let ff = frame_level_features(&labels, &notes, &tl, len, &p).unwrap();
                assert_eq!(ff.len(), p.n_frames(len), "audio_len {len}");
            }
        }
    }

    mod syllable_level {
        use super::*;

        #[test]
        fn two_entry_rounding_example() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a", "i"]);
            let labels = LabelSequence {
                entries: vec![label("a", 0.0, 0.5), label("i", 0.5, 1.0)],
            };
            let notes = NoteSequence {
                events: vec![
                    note(Pitch::Note(60), 0.0, 0.5),
                    note(Pitch::Note(62), 0.5, 1.0),
                ],
                total_s: 1.0,
            };
            let sf = syllable_level_features(&labels, &notes, &tl, 8, &p).unwrap();
            assert_eq!(sf.units.len(), 2);
            assert_eq!(sf.units[0].note_id, 60);
            assert_eq!(sf.units[0].duration_frames, 2);
            assert_eq!(sf.units[1].note_id, 62);
            assert_eq!(
                sf.units[1].duration_frames, 3,
                "final entry absorbs the remainder"
            );
        }

        #[test]
        fn single_entry_takes_every_frame() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a"]);
            let labels = LabelSequence {
                entries: vec![label("a", 0.0, 2.0)],
            };
            let notes = NoteSequence {
                events: vec![note(Pitch::Note(60), 0.0, 2.0)],
                total_s: 2.0,
            };
            let sf = syllable_level_features(&labels, &notes, &tl, 16, &p).unwrap();
            assert_eq!(sf.units.len(), 1);
            assert_eq!(sf.units[0].duration_frames, p.n_frames(16));
        }

        #[test]
        fn tiny_entry_steals_a_frame_from_its_largest_neighbor() {
            // Rate 100, hop 25 → 4 frames/s. The middle entry rounds to 0.
            let p = FrameParams::new(100, 64, 50, 25).unwrap();
            let tl = token_list(&["a", "b", "c"]);
            let labels = LabelSequence {
                entries: vec![
                    label("a", 0.0, 0.5),
                    label("b", 0.5, 0.52),
                    label("c", 0.52, 1.0),
                ],
            };
            let notes = NoteSequence {
                events: vec![note(Pitch::Note(60), 0.0, 1.0)],
                total_s: 1.0,
            };
            let sf = syllable_level_features(&labels, &notes, &tl, 100, &p).unwrap();
            let durs: Vec<usize> = sf.units.iter().map(|u| u.duration_frames).collect();
            assert_eq!(durs, vec![2, 1, 2]);
            assert_eq!(sf.total_frames(), p.n_frames(100));
        }

        #[test]
        fn entry_without_a_note_is_an_error() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a", "i"]);
            let labels = LabelSequence {
                entries: vec![label("a", 0.0, 0.5), label("i", 2.0, 3.0)],
            };
            let notes = NoteSequence {
                events: vec![note(Pitch::Note(60), 0.0, 1.0)],
                total_s: 1.0,
            };
            assert!(matches!(
                syllable_level_features(&labels, &notes, &tl, 24, &p),
                Err(FeaturizeError::NoOverlappingNote(1))
            ));
        }

        #[test]
        fn more_entries_than_frames_is_an_error() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a", "b", "c", "d"]);
            let labels = LabelSequence {
                entries: vec![
                    label("a", 0.0, 0.1),
                    label("b", 0.1, 0.2),
                    label("c", 0.2, 0.3),
                    label("d", 0.3, 0.4),
                ],
            };
            let notes = NoteSequence {
                events: vec![note(Pitch::Note(60), 0.0, 1.0)],
                total_s: 1.0,
            };
            // 2 samples → 2 frames < 4 entries.
            assert!(matches!(
                syllable_level_features(&labels, &notes, &tl, 2, &p),
                Err(FeaturizeError::TooManyUnits {
                    units: 4,
                    frames: 2
                })
            ));
        }

        #[test]
        fn overlap_tie_prefers_the_earlier_note() {
            let p = FrameParams::new(8, 4, 4, 2).unwrap();
            let tl = token_list(&["a"]);
            // Entry straddles two notes with equal halves.
            let labels = LabelSequence {
                entries: vec![label("a", 0.25, 0.75)],
            };
            let notes = NoteSequence {
                events: vec![
                    note(Pitch::Note(60), 0.0, 0.5),
                    note(Pitch::Note(64), 0.5, 1.0),
                ],
                total_s: 1.0,
            };
            let sf = syllable_level_features(&labels, &notes, &tl, 8, &p).unwrap();
            assert_eq!(sf.units[0].note_id, 60);
        }
    }

    mod regulation {
        use super::*;

        #[test]
        fn repeats_ids_by_duration() {
            let sf = SyllableFeatures {
                units: vec![
                    SyllableUnit {
                        phoneme_id: 2,
                        note_id: 60,
                        tempo_bpm: 120.0,
                        beat_pos: 0.0,
                        duration_frames: 2,
                    },
                    SyllableUnit {
                        phoneme_id: 3,
                        note_id: 62,
                        tempo_bpm: 120.0,
                        beat_pos: 1.0,
                        duration_frames: 3,
                    },
                ],
            };
            let ff = length_regulate(&sf);
            assert_eq!(ff.phoneme_ids, vec![2, 2, 3, 3, 3]);
            assert_eq!(ff.note_ids, vec![60, 60, 62, 62, 62]);
        }

        #[test]
        fn single_unit_of_one_frame() {
            let sf = SyllableFeatures {
                units: vec![SyllableUnit {
                    phoneme_id: 5,
                    note_id: 70,
                    tempo_bpm: 90.0,
                    beat_pos: 2.0,
                    duration_frames: 1,
                }],
            };
            let ff = length_regulate(&sf);
            assert_eq!(ff.len(), 1);
        }

        proptest! {
            #[test]
            fn output_length_is_the_duration_sum(
                durs in proptest::collection::vec(1usize..40, 1..20)
            ) {
                let sf = SyllableFeatures {
                    units: durs
                        .iter()
                        .map(|&d| SyllableUnit {
                            phoneme_id: 2,
                            note_id: 60,
                            tempo_bpm: 120.0,
                            beat_pos: 0.0,
                            duration_frames: d,
                        })
                        .collect(),
                };
                prop_assert_eq!(length_regulate(&sf).len(), durs.iter().sum::<usize>());
            }
        }
    }

    mod duration_rules {
        use super::*;

        fn group(phonemes: &[&str], frames: usize) -> (Vec<String>, usize) {
            (phonemes.iter().map(|s| s.to_string()).collect(), frames)
        }

        #[test]
        fn consonant_budget_then_nucleus_remainder() {
            let out = rule_based_durations(&[group(&["k", "a"], 20)], 5).unwrap();
            assert_eq!(out, vec![vec![5, 15]]);
        }

        #[test]
        fn lone_phoneme_takes_the_whole_note() {
            let out = rule_based_durations(&[group(&["a"], 7)], 5).unwrap();
            assert_eq!(out, vec![vec![7]]);
        }

        #[test]
        fn short_note_clamps_to_even_shares() {
            let out = rule_based_durations(&[group(&["k", "a"], 2)], 5).unwrap();
            assert_eq!(out, vec![vec![1, 1]]);
        }

        #[test]
        fn note_shorter_than_phoneme_count_errors() {
            assert!(matches!(
                rule_based_durations(&[group(&["k", "a", "t"], 2)], 5),
                Err(FeaturizeError::NoteTooShort { group: 0 })
            ));
            assert!(matches!(
                rule_based_durations(&[group(&[], 3)], 5),
                Err(FeaturizeError::NoteTooShort { group: 0 })
            ));
        }

        proptest! {
            #[test]
            fn sums_are_exact_and_durations_positive(
                groups in proptest::collection::vec((1usize..6, 0usize..50), 1..10),
                consonant_frames in 1usize..10,
            ) {
                let input: Vec<(Vec<String>, usize)> = groups
                    .iter()
                    .map(|&(k, extra)| {
                        let phonemes = (0..k).map(|i| format!("p{i}")).collect();
                        (phonemes, k + extra) // always ≥ phoneme count
                    })
                    .collect();
                let out = rule_based_durations(&input, consonant_frames).unwrap();
                for (durs, (phonemes, frames)) in out.iter().zip(&input) {
                    prop_assert_eq!(durs.len(), phonemes.len());
                    prop_assert_eq!(durs.iter().sum::<usize>(), *frames);
                    prop_assert!(durs.iter().all(|&d| d >= 1));
                }
            }
        }
    }

    mod syllable_splitting {
        use super::*;

        #[test]
        fn three_way_split() {
            let phonemes: Vec<String> = ["k", "a", "t"].iter().map(|s| s.to_string()).collect();
            let out = split_syllable_evenly(&label("kat", 0.0, 0.9), &phonemes);
            assert_eq!(out.entries.len(), 3);
            assert_relative_eq!(out.entries[0].end_s, 0.3, epsilon = 1e-12);
            assert_relative_eq!(out.entries[1].end_s, 0.6, epsilon = 1e-12);
            assert_eq!(out.entries[2].end_s, 0.9, "last boundary is exact");
            assert_eq!(out.entries[0].phoneme, "k");
            assert_eq!(out.entries[2].phoneme, "t");
        }

        #[test]
        fn single_phoneme_keeps_the_span() {
            let phonemes = vec!["a".to_string()];
            let out = split_syllable_evenly(&label("a", 0.25, 0.75), &phonemes);
            assert_eq!(out.entries.len(), 1);
            assert_eq!((out.entries[0].start_s, out.entries[0].end_s), (0.25, 0.75));
        }

        proptest! {
            #[test]
            fn partition_is_contiguous_and_exact(
                start in 0.0f64..100.0,
                span in 0.01f64..10.0,
                n in 1usize..12,
            ) {
                let phonemes: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
                let entry = label("syl", start, start + span);
                let out = split_syllable_evenly(&entry, &phonemes);
                prop_assert_eq!(out.entries.len(), n);
                prop_assert_eq!(out.entries[0].start_s, entry.start_s);
                prop_assert_eq!(out.entries[n - 1].end_s, entry.end_s);
                for w in out.entries.windows(2) {
                    prop_assert_eq!(w[0].end_s, w[1].start_s);
                }
                for e in &out.entries {
                    prop_assert!(e.end_s > e.start_s);
                }
            }
        }
    }

    mod conservation {
        use super::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn durations_sum_to_the_frame_count(
                seg_frames in proptest::collection::vec(1usize..30, 1..12),
                extra_samples in 0usize..512,
            ) {
                // Build contiguous labels whose spans are multiples of the
                // hop, then perturb the audio length.
                let p = FrameParams::with_defaults(24000);
                let hop_s = p.hop_length as f64 / p.sample_rate_hz as f64;
                let mut entries = Vec::new();
                let mut t = 0.0;
                for (i, &f) in seg_frames.iter().enumerate() {
                    let end = t + f as f64 * hop_s;
                    entries.push(label(if i % 2 == 0 { "a" } else { "i" }, t, end));
                    t = end;
                }
                let labels = LabelSequence { entries };
                let notes = crate::score::normalize_score(&NoteSequence {
                    events: vec![note(Pitch::Note(60), 0.0, t)],
                    total_s: t,
                });
                let tl = token_list(&["a", "i"]);
                let audio_len =
                    (t * p.sample_rate_hz as f64).round() as usize + extra_samples;

                let sf = syllable_level_features(&labels, &notes, &tl, audio_len, &p).unwrap();
                prop_assert_eq!(sf.total_frames(), p.n_frames(audio_len));
                prop_assert!(sf.units.iter().all(|u| u.duration_frames >= 1));

                let ff = frame_level_features(&labels, &notes, &tl, audio_len, &p).unwrap();
                prop_assert_eq!(length_regulate(&sf).len(), ff.len());
            }
        }
    }
}
