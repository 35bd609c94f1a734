//! Musical score and phoneme label handling: SMF and label-file parsing,
//! score normalization to a monophonic gap-free timeline, silence-based
//! segmentation, and rule-based transcription from F0.

use thiserror::Error;

pub mod label;
pub mod smf;

pub use label::{parse_label, serialize_label};
pub use smf::{parse_smf, write_smf};

use crate::dsp::F0Track;

/// Phoneme tokens treated as silence by segmentation and transcription.
pub const DEFAULT_SILENCE_TOKENS: [&str; 4] = ["sil", "pau", "SP", "AP"];

/// Note id used for rests in featurized scores (one past the MIDI range).
pub const REST_NOTE_ID: u32 = 128;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("not a standard MIDI file")]
    NotSmf,
    #[error("unsupported SMF format {0}")]
    UnsupportedFormat(u16),
    #[error("SMPTE division timing is not supported")]
    SmpteTimingUnsupported,
    #[error("chunk extends past end of file")]
    TruncatedChunk,
    #[error("malformed event near byte {offset}")]
    MalformedEvent { offset: usize },
    #[error("note-on for pitch {pitch} at tick {tick} has no matching note-off")]
    UnmatchedNoteOn { pitch: u8, tick: u64 },
    #[error("line {line}: labels must be utt_id followed by start/end/phoneme triplets")]
    MalformedTriplet { line: usize },
    #[error("utterance {utt_id}: label entries overlap")]
    OverlappingEntries { utt_id: String },
    #[error("utterance {utt_id}: entry {index} has nonpositive duration")]
    NonpositiveDuration { utt_id: String, index: usize },
    #[error("utterance {utt_id}: entry {index} has a negative time")]
    InvalidTime { utt_id: String, index: usize },
    #[error("utterance {utt_id} appears more than once")]
    DuplicateUtterance { utt_id: String },
    #[error("cannot transcribe from an empty F0 track")]
    EmptyF0Track,
}

/// A pitch or a rest. MIDI note numbers are 0..=127.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pitch {
    Rest,
    Note(u8),
}

impl Pitch {
    pub fn is_rest(&self) -> bool {
        matches!(self, Pitch::Rest)
    }

    /// Featurization id: the MIDI number for notes, 128 for rests.
    pub fn note_id(&self) -> u32 {
        match self {
            Pitch::Rest => REST_NOTE_ID,
            Pitch::Note(n) => *n as u32,
        }
    }
}

/// One note (or rest) on the score timeline. Times are seconds; `tempo_bpm`
/// is the tempo in effect at the onset and `beat_pos` the fractional beat
/// position of the onset within its measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteEvent {
    pub pitch: Pitch,
    pub onset_s: f64,
    pub offset_s: f64,
    pub tempo_bpm: f64,
    pub beat_pos: f64,
}

impl NoteEvent {
    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

/// A melody line: events in nondecreasing onset order. After
/// `normalize_score` the events are non-overlapping, gap-free from 0 to
/// `total_s`, and `total_s` equals the last offset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoteSequence {
    pub events: Vec<NoteEvent>,
    pub total_s: f64,
}

/// One phoneme with its time span in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    pub phoneme: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl LabelEntry {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Phoneme entries in nondecreasing start order, non-overlapping; gaps are
/// permitted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelSequence {
    pub entries: Vec<LabelEntry>,
}

impl LabelSequence {
    /// Span from the first start to the last end; 0 when empty.
    pub fn span_s(&self) -> f64 {
        match (self.entries.first(), self.entries.last()) {
            (Some(first), Some(last)) => last.end_s - first.start_s,
            _ => 0.0,
        }
    }
}

/// A segment cut from an utterance: notes and labels re-based to start at
/// time 0, plus the segment's position on the original timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSegment {
    pub notes: NoteSequence,
    pub labels: LabelSequence,
    pub start_s: f64,
    pub end_s: f64,
}

/// Normalizes a score into a monophonic, gap-free timeline:
///
/// * events sharing an onset are collapsed to the highest pitch (the melody
///   convention; rests lose to notes),
/// * each note is truncated to end no later than the next onset,
/// * gaps, including one before the first event and one up to `total_s`,
///   are filled with rests.
///
/// Rests synthesized here carry the neighboring tempo and beat position 0.
/// The operation is idempotent.
pub fn normalize_score(input: &NoteSequence) -> NoteSequence {
    let mut events = input.events.clone();
    events.sort_by(|a, b| {
        a.onset_s
            .total_cmp(&b.onset_s)
            .then(a.pitch.note_id().cmp(&b.pitch.note_id()))
    });

    // Collapse equal onsets, keeping the highest pitch; notes beat rests.
    let mut collapsed: Vec<NoteEvent> = Vec::with_capacity(events.len());
    for e in events {
        match collapsed.last_mut() {
            Some(last) if last.onset_s == e.onset_s => {
                let keep_new = match (last.pitch, e.pitch) {
                    (Pitch::Rest, _) => true,
                    (Pitch::Note(_), Pitch::Rest) => false,
                    (Pitch::Note(a), Pitch::Note(b)) => b >= a,
                };
                if keep_new {
                    *last = e;
                }
            }
            _ => collapsed.push(e),
        }
    }

    // Truncate overlaps against the next onset and drop emptied notes.
    let mut truncated: Vec<NoteEvent> = Vec::with_capacity(collapsed.len());
    for i in 0..collapsed.len() {
        let mut e = collapsed[i];
        if i + 1 < collapsed.len() {
            e.offset_s = e.offset_s.min(collapsed[i + 1].onset_s);
        }
        if e.offset_s > e.onset_s {
            truncated.push(e);
        }
    }

    // Fill gaps with rests.
    let total_in = input
        .total_s
        .max(truncated.last().map_or(0.0, |e| e.offset_s));
    let mut out: Vec<NoteEvent> = Vec::with_capacity(truncated.len());
    let mut clock = 0.0f64;
    for e in truncated {
        if e.onset_s > clock {
            out.push(NoteEvent {
                pitch: Pitch::Rest,
                onset_s: clock,
                offset_s: e.onset_s,
                tempo_bpm: e.tempo_bpm,
                beat_pos: 0.0,
            });
        }
        clock = e.offset_s;
        out.push(e);
    }
    if total_in > clock {
        let tempo = out.last().map_or(120.0, |e| e.tempo_bpm);
        out.push(NoteEvent {
            pitch: Pitch::Rest,
            onset_s: clock,
            offset_s: total_in,
            tempo_bpm: tempo,
            beat_pos: 0.0,
        });
    }

    let total_s = out.last().map_or(0.0, |e| e.offset_s);
    NoteSequence {
        events: out,
        total_s,
    }
}

/// Cuts an utterance at every silence label lasting at least `min_sil_s`,
/// drops silence labels sitting on segment boundaries, and re-bases each
/// segment's notes and labels to start at 0. Notes overlapping a segment
/// are clipped to it. Segments left without labels are discarded.
pub fn segment_by_silence(
    notes: &NoteSequence,
    labels: &LabelSequence,
    min_sil_s: f64,
    silence_tokens: &[&str],
) -> Vec<ScoreSegment> {
    let is_silence = |e: &LabelEntry| silence_tokens.contains(&e.phoneme.as_str());
    let is_cut = |e: &LabelEntry| is_silence(e) && e.duration_s() >= min_sil_s;

    let mut runs: Vec<Vec<&LabelEntry>> = Vec::new();
    let mut current: Vec<&LabelEntry> = Vec::new();
    for e in &labels.entries {
        if is_cut(e) {
            if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        } else {
            current.push(e);
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }

    let mut segments = Vec::new();
    for run in runs {
        // Trim silence labels at the run's edges.
        let mut lo = 0;
        let mut hi = run.len();
        while lo < hi && is_silence(run[lo]) {
            lo += 1;
        }
        while hi > lo && is_silence(run[hi - 1]) {
            hi -= 1;
        }
        if lo == hi {
            continue;
        }
        let kept = &run[lo..hi];
        let start_s = kept[0].start_s;
        let end_s = kept[kept.len() - 1].end_s;

        let entries = kept
            .iter()
            .map(|e| LabelEntry {
                phoneme: e.phoneme.clone(),
                start_s: e.start_s - start_s,
                end_s: e.end_s - start_s,
            })
            .collect();

        let events: Vec<NoteEvent> = notes
            .events
            .iter()
            .filter(|n| n.onset_s < end_s && n.offset_s > start_s)
            .map(|n| NoteEvent {
                pitch: n.pitch,
                onset_s: n.onset_s.max(start_s) - start_s,
                offset_s: n.offset_s.min(end_s) - start_s,
                tempo_bpm: n.tempo_bpm,
                beat_pos: n.beat_pos,
            })
            .collect();
        let total_s = events.iter().map(|e| e.offset_s).fold(0.0f64, f64::max);

        segments.push(ScoreSegment {
            notes: NoteSequence { events, total_s },
            labels: LabelSequence { entries },
            start_s,
            end_s,
        });
    }
    segments
}

/// Knobs for `transcribe_rule_based`.
#[derive(Debug, Clone)]
pub struct TranscribeOptions {
    /// Tempo stamped on every produced event.
    pub default_tempo_bpm: f64,
    /// An entry is a rest unless at least this fraction of its frames are
    /// voiced.
    pub min_voiced_ratio: f64,
    pub silence_tokens: Vec<String>,
}

impl Default for TranscribeOptions {
    fn default() -> Self {
        Self {
            default_tempo_bpm: 120.0,
            min_voiced_ratio: 0.2,
            silence_tokens: DEFAULT_SILENCE_TOKENS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// Derives a note per label entry from an F0 track: the median voiced F0
/// inside the entry rounds to the nearest MIDI number (clamped to 0..=127);
/// silence labels and entries with too few voiced frames become rests.
/// Beat positions assume a 4/4 measure at the default tempo.
pub fn transcribe_rule_based(
    f0: &F0Track,
    labels: &LabelSequence,
    opts: &TranscribeOptions,
) -> Result<NoteSequence, ScoreError> {
    if f0.is_empty() {
        return Err(ScoreError::EmptyF0Track);
    }
    let hop_s = f0.params.hop_length as f64 / f0.params.sample_rate_hz as f64;
    let n = f0.len();
    let mut events = Vec::with_capacity(labels.entries.len());
    for entry in &labels.entries {
        // Frames whose centers fall inside [start, end).
        let first = (entry.start_s / hop_s).ceil() as usize;
        let mut voiced: Vec<f64> = Vec::new();
        let mut total = 0usize;
        let mut t = first;
        while t < n && (t as f64) * hop_s < entry.end_s {
            total += 1;
            if f0.voiced[t] && f0.f0_hz[t] > 0.0 {
                voiced.push(f0.f0_hz[t]);
            }
            t += 1;
        }

        let is_silence = opts.silence_tokens.iter().any(|s| s == &entry.phoneme);
        let voiced_enough =
            total > 0 && (voiced.len() as f64) / (total as f64) >= opts.min_voiced_ratio;
        let pitch = if is_silence || !voiced_enough {
            Pitch::Rest
        } else {
            let m = crate::featurize::hz_to_midi(median(&mut voiced));
            Pitch::Note(m.round().clamp(0.0, 127.0) as u8)
        };

        let beats = entry.start_s * opts.default_tempo_bpm / 60.0;
        events.push(NoteEvent {
            pitch,
            onset_s: entry.start_s,
            offset_s: entry.end_s,
            tempo_bpm: opts.default_tempo_bpm,
            beat_pos: beats % 4.0,
        });
    }
    let total_s = events.last().map_or(0.0, |e| e.offset_s);
    Ok(NoteSequence { events, total_s })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
