//! Phoneme label file parsing and serialization.
//!
//! Format: one utterance per line, `utt_id` followed by whitespace-separated
//! `start end phoneme` triplets with times in seconds. Entries must be
//! non-overlapping and in nondecreasing start order; gaps are allowed.

use std::collections::BTreeMap;

use super::{LabelEntry, LabelSequence, ScoreError};

/// Parses a label file into per-utterance sequences keyed by utterance id.
pub fn parse_label(text: &str) -> Result<BTreeMap<String, LabelSequence>, ScoreError> {
    let mut out = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let utt_id = tokens[0].to_string();
        if !(tokens.len() - 1).is_multiple_of(3) {
            return Err(ScoreError::MalformedTriplet { line: line_no });
        }
        let mut entries = Vec::with_capacity((tokens.len() - 1) / 3);
        for (index, chunk) in tokens[1..].chunks_exact(3).enumerate() {
            let start_s =
                parse_time(chunk[0]).ok_or(ScoreError::MalformedTriplet { line: line_no })?;
            let end_s =
                parse_time(chunk[1]).ok_or(ScoreError::MalformedTriplet { line: line_no })?;
            if start_s < 0.0 {
                return Err(ScoreError::InvalidTime {
                    utt_id: utt_id.clone(),
                    index,
                });
            }
            if end_s <= start_s {
                return Err(ScoreError::NonpositiveDuration {
                    utt_id: utt_id.clone(),
                    index,
                });
            }
            entries.push(LabelEntry {
                phoneme: chunk[2].to_string(),
                start_s,
                end_s,
            });
        }
        for w in entries.windows(2) {
            if w[1].start_s < w[0].end_s {
                return Err(ScoreError::OverlappingEntries {
                    utt_id: utt_id.clone(),
                });
            }
        }
        if out
            .insert(utt_id.clone(), LabelSequence { entries })
            .is_some()
        {
            return Err(ScoreError::DuplicateUtterance { utt_id });
        }
    }
    Ok(out)
}

fn parse_time(token: &str) -> Option<f64> {
    let v: f64 = token.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Serializes label sequences back to the line format, sorted by utterance
/// id, times printed with microsecond precision.
pub fn serialize_label(labels: &BTreeMap<String, LabelSequence>) -> String {
    let mut out = String::new();
    for (utt_id, seq) in labels {
        out.push_str(utt_id);
        for e in &seq.entries {
            out.push_str(&format!(" {:.6} {:.6} {}", e.start_s, e.end_s, e.phoneme));
        }
        out.push('\n');
    }
    out
}
