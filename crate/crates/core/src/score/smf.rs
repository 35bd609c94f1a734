//! Standard MIDI File parsing and a small constant-structure writer.
//!
//! The parser handles format 0 and 1 files with tick-per-quarter timing,
//! running status, the set-tempo and time-signature metas, and velocity-0
//! note-ons as note-offs. Notes from all non-percussion tracks (channel 10
//! excluded) are merged into one stream sorted by onset; overlap resolution
//! is left to `normalize_score`. Every read is bounds-checked, so arbitrary
//! bytes produce a typed error rather than a panic.

use super::{NoteEvent, NoteSequence, Pitch, ScoreError};

const DEFAULT_US_PER_QUARTER: u32 = 500_000; // 120 BPM
const PERCUSSION_CHANNEL: u8 = 9;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ScoreError> {
        if self.remaining() < n {
            return Err(ScoreError::TruncatedChunk);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ScoreError> {
        Ok(self.take(1)?[0])
    }

    fn peek_u8(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    fn u16_be(&mut self) -> Result<u16, ScoreError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32_be(&mut self) -> Result<u32, ScoreError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most four bytes.
    fn varlen(&mut self) -> Result<u32, ScoreError> {
        let mut value = 0u32;
        for i in 0.. {
            let byte = self.u8()?;
            value = (value << 7) | (byte & 0x7F) as u32;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            if i == 3 {
                return Err(ScoreError::MalformedEvent { offset: self.pos });
            }
        }
        unreachable!()
    }
}

/// A matched note with tick-domain timing.
struct RawNote {
    on_tick: u64,
    off_tick: u64,
    pitch: u8,
}

/// Parses an SMF byte stream into a `NoteSequence` with second-domain
/// timing, tempo in BPM, and the fractional beat position of each onset
/// within its measure.
pub fn parse_smf(bytes: &[u8]) -> Result<NoteSequence, ScoreError> {
    let mut c = Cursor::new(bytes);
    if c.take(4).map_err(|_| ScoreError::NotSmf)? != b"MThd" {
        return Err(ScoreError::NotSmf);
    }
    let header_len = c.u32_be()?;
    if header_len < 6 {
        return Err(ScoreError::MalformedEvent { offset: c.pos });
    }
    let format = c.u16_be()?;
    if format > 1 {
        return Err(ScoreError::UnsupportedFormat(format));
    }
    let _declared_tracks = c.u16_be()?;
    let division = c.u16_be()?;
    if division & 0x8000 != 0 {
        return Err(ScoreError::SmpteTimingUnsupported);
    }
    if division == 0 {
        return Err(ScoreError::MalformedEvent { offset: c.pos });
    }
    let tpq = division as f64;
    c.take(header_len as usize - 6)?;

    let mut notes: Vec<RawNote> = Vec::new();
    let mut tempos: Vec<(u64, u32)> = Vec::new();
    let mut timesigs: Vec<(u64, u8, u8)> = Vec::new();

    while c.remaining() > 0 {
        if c.remaining() < 8 {
            return Err(ScoreError::TruncatedChunk);
        }
        let id = c.take(4)?;
        let len = c.u32_be()? as usize;
        let body = c.take(len)?;
        if id == b"MTrk" {
            parse_track(body, &mut notes, &mut tempos, &mut timesigs)?;
        }
        // Unknown chunk types are skipped, as the SMF spec requires.
    }

    // Tick -> seconds via the tempo map. Events at the same tick keep the
    // last tempo written there.
    tempos.sort_by_key(|&(tick, _)| tick);
    let mut tempo_map: Vec<(u64, u32)> = Vec::new();
    for (tick, us) in tempos {
        match tempo_map.last_mut() {
            Some(last) if last.0 == tick => last.1 = us,
            _ => tempo_map.push((tick, us)),
        }
    }
    if tempo_map.first().is_none_or(|&(tick, _)| tick != 0) {
        tempo_map.insert(0, (0, DEFAULT_US_PER_QUARTER));
    }

    timesigs.sort_by_key(|&(tick, ..)| tick);
    let mut ts_map: Vec<(u64, u8, u8)> = Vec::new();
    for (tick, n, d) in timesigs {
        match ts_map.last_mut() {
            Some(last) if last.0 == tick => (last.1, last.2) = (n, d),
            _ => ts_map.push((tick, n, d)),
        }
    }
    if ts_map.first().is_none_or(|&(tick, ..)| tick != 0) {
        ts_map.insert(0, (0, 4, 4));
    }

    // Cumulative seconds at each tempo-change tick.
    let mut tempo_starts_s = Vec::with_capacity(tempo_map.len());
    let mut acc = 0.0f64;
    for i in 0..tempo_map.len() {
        tempo_starts_s.push(acc);
        if i + 1 < tempo_map.len() {
            let span_ticks = (tempo_map[i + 1].0 - tempo_map[i].0) as f64;
            acc += span_ticks * tempo_map[i].1 as f64 / (tpq * 1e6);
        }
    }
    let seconds_at = |tick: u64| -> f64 {
        let i = match tempo_map.binary_search_by_key(&tick, |&(t, _)| t) {
            Ok(i) => i,
            Err(i) => i - 1, // i >= 1 because tempo_map starts at tick 0
        };
        tempo_starts_s[i] + (tick - tempo_map[i].0) as f64 * tempo_map[i].1 as f64 / (tpq * 1e6)
    };
    let tempo_at = |tick: u64| -> f64 {
        let i = match tempo_map.binary_search_by_key(&tick, |&(t, _)| t) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        60e6 / tempo_map[i].1 as f64
    };
    let beat_at = |tick: u64| -> f64 {
        let i = match ts_map.binary_search_by_key(&tick, |&(t, ..)| t) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let (seg_tick, numer, denom) = ts_map[i];
        // One beat is a 1/denom note: tpq * 4 / denom ticks.
        let ticks_per_beat = tpq * 4.0 / denom as f64;
        let beats = (tick - seg_tick) as f64 / ticks_per_beat;
        beats % numer as f64
    };

    let mut events: Vec<NoteEvent> = notes
        .iter()
        .filter(|n| n.off_tick > n.on_tick)
        .map(|n| NoteEvent {
            pitch: Pitch::Note(n.pitch),
            onset_s: seconds_at(n.on_tick),
            offset_s: seconds_at(n.off_tick),
            tempo_bpm: tempo_at(n.on_tick),
            beat_pos: beat_at(n.on_tick),
        })
        .collect();
    events.sort_by(|a, b| {
        a.onset_s
            .total_cmp(&b.onset_s)
            .then(a.pitch.note_id().cmp(&b.pitch.note_id()))
            .then(a.offset_s.total_cmp(&b.offset_s))
    });
    let total_s = events.iter().map(|e| e.offset_s).fold(0.0f64, f64::max);
    Ok(NoteSequence { events, total_s })
}

fn parse_track(
    body: &[u8],
    notes: &mut Vec<RawNote>,
    tempos: &mut Vec<(u64, u32)>,
    timesigs: &mut Vec<(u64, u8, u8)>,
) -> Result<(), ScoreError> {
    let mut c = Cursor::new(body);
    let mut tick = 0u64;
    let mut running_status: Option<u8> = None;
    // FIFO of pending note-on ticks per (channel, pitch).
    let mut pending: Vec<std::collections::VecDeque<u64>> = vec![Default::default(); 16 * 128];

    while c.remaining() > 0 {
        tick += c.varlen()? as u64;
        let status = match c.peek_u8() {
            Some(b) if b >= 0x80 => {
                c.u8()?;
                if b < 0xF0 {
                    running_status = Some(b);
                }
                b
            }
            Some(_) => running_status.ok_or(ScoreError::MalformedEvent { offset: c.pos })?,
            None => return Err(ScoreError::TruncatedChunk),
        };

        match status {
            0x80..=0x9F => {
                let channel = status & 0x0F;
                let pitch = c.u8()?;
                let velocity = c.u8()?;
                if pitch > 0x7F || velocity > 0x7F {
                    return Err(ScoreError::MalformedEvent { offset: c.pos });
                }
                if channel == PERCUSSION_CHANNEL {
                    continue;
                }
                let key = channel as usize * 128 + pitch as usize;
                let is_on = status & 0xF0 == 0x90 && velocity > 0;
                if is_on {
                    pending[key].push_back(tick);
                } else if let Some(on_tick) = pending[key].pop_front() {
                    notes.push(RawNote {
                        on_tick,
                        off_tick: tick,
                        pitch,
                    });
                }
                // A note-off with no pending note-on is ignored.
            }
            0xA0..=0xBF | 0xE0..=0xEF => {
                c.take(2)?;
            }
            0xC0..=0xDF => {
                c.take(1)?;
            }
            0xF0 | 0xF7 => {
                running_status = None;
                let len = c.varlen()? as usize;
                c.take(len)?;
            }
            0xFF => {
                running_status = None;
                let meta_type = c.u8()?;
                let len = c.varlen()? as usize;
                let data = c.take(len)?;
                match meta_type {
                    0x51 if len >= 3 => {
                        let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if us > 0 {
                            tempos.push((tick, us));
                        }
                    }
                    0x58 if len >= 2 => {
                        let numer = data[0];
                        let denom_pow = data[1];
                        if numer > 0 && denom_pow <= 7 {
                            timesigs.push((tick, numer, 1u8 << denom_pow));
                        }
                    }
                    0x2F => break, // end of track; trailing bytes are ignored
                    _ => {}
                }
            }
            _ => return Err(ScoreError::MalformedEvent { offset: c.pos }),
        }
    }

    for (key, queue) in pending.iter().enumerate() {
        if let Some(&on_tick) = queue.front() {
            return Err(ScoreError::UnmatchedNoteOn {
                pitch: (key % 128) as u8,
                tick: on_tick,
            });
        }
    }
    Ok(())
}

/// Writes a `NoteSequence` as a format-0 SMF with 480 ticks per quarter.
///
/// Tempo changes are emitted at the onset of each event whose `tempo_bpm`
/// differs from the running tempo; rests contribute no events beyond the
/// time they occupy. Intended for persisting normalized or segmented scores,
/// not as a general-purpose MIDI writer.
pub fn write_smf(notes: &NoteSequence) -> Vec<u8> {
    const TPQ: f64 = 480.0;
    let mut track: Vec<(u64, u8, Vec<u8>)> = Vec::new(); // (tick, sort class, payload)

    // 4/4 time signature at tick 0.
    track.push((0, 0, vec![0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08]));

    let first_tempo = notes.events.first().map_or(120.0, |e| e.tempo_bpm);
    let mut current_bpm = if first_tempo > 0.0 {
        first_tempo
    } else {
        120.0
    };
    let tempo_meta = |bpm: f64| -> Vec<u8> {
        let us = (60e6 / bpm).round().clamp(1.0, 0xFF_FF_FF as f64) as u32;
        let b = us.to_be_bytes();
        vec![0xFF, 0x51, 0x03, b[1], b[2], b[3]]
    };
    track.push((0, 0, tempo_meta(current_bpm)));

    // Piecewise-linear second -> tick map anchored at the last tempo change.
    let mut anchor_tick = 0u64;
    let mut anchor_s = 0.0f64;
    let mut last_tick = 0u64;
    for e in &notes.events {
        let to_tick = |s: f64, anchor_tick: u64, anchor_s: f64, bpm: f64| -> u64 {
            anchor_tick + (((s - anchor_s) * bpm / 60.0) * TPQ).round().max(0.0) as u64
        };
        let on_tick = to_tick(e.onset_s, anchor_tick, anchor_s, current_bpm);
        if e.tempo_bpm > 0.0 && (e.tempo_bpm - current_bpm).abs() > 1e-9 {
            track.push((on_tick, 0, tempo_meta(e.tempo_bpm)));
            anchor_tick = on_tick;
            anchor_s = e.onset_s;
            current_bpm = e.tempo_bpm;
        }
        if let Pitch::Note(pitch) = e.pitch {
            let off_tick = to_tick(e.offset_s, anchor_tick, anchor_s, current_bpm);
            track.push((on_tick, 2, vec![0x90, pitch, 64]));
            track.push((off_tick, 1, vec![0x80, pitch, 0]));
            last_tick = last_tick.max(off_tick);
        } else {
            let off_tick = to_tick(e.offset_s, anchor_tick, anchor_s, current_bpm);
            last_tick = last_tick.max(off_tick);
        }
    }

    // Stable order: by tick, then metas, then note-offs before note-ons.
    track.sort_by_key(|&(tick, class, _)| (tick, class));

    let mut body = Vec::new();
    let mut prev_tick = 0u64;
    for (tick, _, payload) in &track {
        push_varlen(&mut body, tick - prev_tick);
        body.extend_from_slice(payload);
        prev_tick = *tick;
    }
    push_varlen(&mut body, last_tick.saturating_sub(prev_tick));
    body.extend_from_slice(&[0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(14 + 8 + body.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes()); // format 0
    out.extend_from_slice(&1u16.to_be_bytes()); // one track
    out.extend_from_slice(&(TPQ as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

fn push_varlen(out: &mut Vec<u8>, mut value: u64) {
    let mut bytes = [0u8; 8];
    let mut n = 0;
    loop {
        bytes[n] = (value & 0x7F) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let mut b = bytes[i];
        if i > 0 {
            b |= 0x80;
        }
        out.push(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-assembled format-0 file: default tempo, one note C4 (60) held
    /// for 480 ticks at 480 tpq => 0.5 s at 120 BPM.
    fn single_note_file() -> Vec<u8> {
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0x90, 60, 100]); // delta 0, note on
        track.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0]); // delta 480, note off
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        assemble(0, 480, &[track])
    }

    fn assemble(format: u16, division: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"MThd");
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&division.to_be_bytes());
        for t in tracks {
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(t.len() as u32).to_be_bytes());
            out.extend_from_slice(t);
        }
        out
    }

    #[test]
    fn single_note_default_tempo() {
        let ns = parse_smf(&single_note_file()).unwrap();
        assert_eq!(ns.events.len(), 1);
        let e = &ns.events[0];
        assert_eq!(e.pitch, Pitch::Note(60));
        assert!((e.onset_s - 0.0).abs() < 1e-12);
        assert!(
            (e.offset_s - 0.5).abs() < 1e-12,
            "480 ticks at 120 BPM is 0.5 s"
        );
        assert!((e.tempo_bpm - 120.0).abs() < 1e-9);
        assert_eq!(e.beat_pos, 0.0);
        assert!((ns.total_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tempo_change_rescales_later_ticks() {
        // Set tempo to 60 BPM (1e6 us/q) at tick 0: 480 ticks -> 1.0 s.
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40]);
        track.extend_from_slice(&[0x00, 0x90, 60, 100]);
        track.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(0, 480, &[track])).unwrap();
        assert!((ns.events[0].offset_s - 1.0).abs() < 1e-12);
        assert!((ns.events[0].tempo_bpm - 60.0).abs() < 1e-9);
    }

    #[test]
    fn velocity_zero_note_on_acts_as_note_off() {
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0x90, 72, 100]);
        track.extend_from_slice(&[0x83, 0x60, 0x90, 72, 0]); // running NOT used; vel 0 off
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(0, 480, &[track])).unwrap();
        assert_eq!(ns.events.len(), 1);
        assert!((ns.events[0].offset_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn running_status_is_honored() {
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0x90, 60, 100]);
        track.extend_from_slice(&[0x60, 62, 100]); // running status: second note on
        track.extend_from_slice(&[0x60, 60, 0]); // off via vel 0
        track.extend_from_slice(&[0x60, 62, 0]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(0, 480, &[track])).unwrap();
        assert_eq!(ns.events.len(), 2);
        assert_eq!(ns.events[0].pitch, Pitch::Note(60));
        assert_eq!(ns.events[1].pitch, Pitch::Note(62));
        assert!(ns.events[0].onset_s <= ns.events[1].onset_s);
    }

    #[test]
    fn format_1_tracks_are_merged_and_sorted() {
        let mut t1 = Vec::new();
        t1.extend_from_slice(&[0x83, 0x60, 0x90, 64, 100]); // starts at tick 480
        t1.extend_from_slice(&[0x83, 0x60, 0x80, 64, 0]);
        t1.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let mut t2 = Vec::new();
        t2.extend_from_slice(&[0x00, 0x90, 60, 100]); // starts at tick 0
        t2.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0]);
        t2.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(1, 480, &[t1, t2])).unwrap();
        assert_eq!(ns.events.len(), 2);
        assert_eq!(
            ns.events[0].pitch,
            Pitch::Note(60),
            "merged stream sorted by onset"
        );
        assert_eq!(ns.events[1].pitch, Pitch::Note(64));
    }

    #[test]
    fn percussion_channel_is_excluded() {
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0x99, 36, 100]); // channel 10 kick
        track.extend_from_slice(&[0x83, 0x60, 0x89, 36, 0]);
        track.extend_from_slice(&[0x00, 0x90, 60, 100]);
        track.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(0, 480, &[track])).unwrap();
        assert_eq!(ns.events.len(), 1);
        assert_eq!(ns.events[0].pitch, Pitch::Note(60));
    }

    #[test]
    fn bad_magic_is_not_smf() {
        assert!(matches!(parse_smf(b"RIFFxxxx"), Err(ScoreError::NotSmf)));
        assert!(matches!(parse_smf(b""), Err(ScoreError::NotSmf)));
        assert!(matches!(parse_smf(b"MTh"), Err(ScoreError::NotSmf)));
    }

    #[test]
    fn format_2_is_unsupported() {
        let file = assemble(2, 480, &[vec![0x00, 0xFF, 0x2F, 0x00]]);
        assert!(matches!(
            parse_smf(&file),
            Err(ScoreError::UnsupportedFormat(2))
        ));
    }

    #[test]
    fn smpte_division_is_unsupported() {
        let file = assemble(0, 0xE250, &[vec![0x00, 0xFF, 0x2F, 0x00]]);
        assert!(matches!(
            parse_smf(&file),
            Err(ScoreError::SmpteTimingUnsupported)
        ));
    }

    #[test]
    fn truncated_track_chunk_errors() {
        let mut file = single_note_file();
        file.truncate(file.len() - 4);
        assert!(matches!(parse_smf(&file), Err(ScoreError::TruncatedChunk)));
    }

    #[test]
    fn dangling_note_on_is_reported() {
        let mut track = Vec::new();
        track.extend_from_slice(&[0x05, 0x90, 61, 100]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let err = parse_smf(&assemble(0, 480, &[track])).unwrap_err();
        assert!(matches!(
            err,
            ScoreError::UnmatchedNoteOn { pitch: 61, tick: 5 }
        ));
    }

    #[test]
    fn orphan_note_off_is_ignored() {
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0x80, 60, 0]);
        track.extend_from_slice(&[0x00, 0x90, 62, 100]);
        track.extend_from_slice(&[0x83, 0x60, 0x80, 62, 0]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(0, 480, &[track])).unwrap();
        assert_eq!(ns.events.len(), 1);
    }

    #[test]
    fn empty_track_yields_empty_sequence() {
        let ns = parse_smf(&assemble(0, 480, &[vec![0x00, 0xFF, 0x2F, 0x00]])).unwrap();
        assert!(ns.events.is_empty());
        assert_eq!(ns.total_s, 0.0);
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let mut file = assemble(0, 480, &[]);
        file.extend_from_slice(b"XFIH");
        file.extend_from_slice(&4u32.to_be_bytes());
        file.extend_from_slice(&[1, 2, 3, 4]);
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0x90, 60, 100]);
        track.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(track.len() as u32).to_be_bytes());
        file.extend_from_slice(&track);
        let ns = parse_smf(&file).unwrap();
        assert_eq!(ns.events.len(), 1);
    }

    #[test]
    fn beat_position_tracks_the_time_signature() {
        // 3/4 time: onset at tick 1.5 * 480 = 720 is beat 1.5 of the measure.
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0xFF, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08]);
        track.extend_from_slice(&[0x85, 0x50, 0x90, 60, 100]); // delta 720
        track.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(0, 480, &[track])).unwrap();
        assert!((ns.events[0].beat_pos - 1.5).abs() < 1e-9);

        // Past one full measure the count wraps: tick 4 * 480 in 3/4 is beat 1.
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0xFF, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08]);
        track.extend_from_slice(&[0x8F, 0x00, 0x90, 60, 100]); // delta 1920
        track.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0]);
        track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        let ns = parse_smf(&assemble(0, 480, &[track])).unwrap();
        assert!((ns.events[0].beat_pos - 1.0).abs() < 1e-9);
    }

    #[test]
    fn writer_output_parses_back_with_matching_timing() {
        let ns = NoteSequence {
            events: vec![
                NoteEvent {
                    pitch: Pitch::Note(60),
                    onset_s: 0.0,
                    offset_s: 0.5,
                    tempo_bpm: 120.0,
                    beat_pos: 0.0,
                },
                NoteEvent {
                    pitch: Pitch::Rest,
                    onset_s: 0.5,
                    offset_s: 0.75,
                    tempo_bpm: 120.0,
                    beat_pos: 1.0,
                },
                NoteEvent {
                    pitch: Pitch::Note(64),
                    onset_s: 0.75,
                    offset_s: 1.5,
                    tempo_bpm: 120.0,
                    beat_pos: 1.5,
                },
            ],
            total_s: 1.5,
        };
        let back = parse_smf(&write_smf(&ns)).unwrap();
        assert_eq!(back.events.len(), 2, "rests become gaps");
        let tol = 1.0 / 960.0 + 1e-9; // one tick at 120 BPM / 480 tpq
        assert_eq!(back.events[0].pitch, Pitch::Note(60));
        assert!((back.events[0].offset_s - 0.5).abs() <= tol);
        assert_eq!(back.events[1].pitch, Pitch::Note(64));
        assert!((back.events[1].onset_s - 0.75).abs() <= tol);
        assert!((back.events[1].offset_s - 1.5).abs() <= tol);
        assert!((back.events[0].tempo_bpm - 120.0).abs() < 1e-6);
    }

    #[test]
    fn writer_emits_tempo_changes() {
        let ns = NoteSequence {
            events: vec![
                NoteEvent {
                    pitch: Pitch::Note(60),
                    onset_s: 0.0,
                    offset_s: 0.5,
                    tempo_bpm: 120.0,
                    beat_pos: 0.0,
                },
                NoteEvent {
                    pitch: Pitch::Note(62),
                    onset_s: 0.5,
                    offset_s: 1.5,
                    tempo_bpm: 60.0,
                    beat_pos: 1.0,
                },
            ],
            total_s: 1.5,
        };
        let back = parse_smf(&write_smf(&ns)).unwrap();
        assert_eq!(back.events.len(), 2);
        assert!((back.events[1].tempo_bpm - 60.0).abs() < 1e-6);
        let tol = 2.0 / 480.0;
        assert!((back.events[1].offset_s - 1.5).abs() <= tol);
    }
}
