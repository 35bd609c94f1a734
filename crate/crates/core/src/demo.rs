//! Synthetic demo corpus: a handful of "songs" of sine singing with known
//! scores, written out as a Kaldi-style data directory. Used by the CLI's
//! `--demo` bootstrap and by the end-to-end tests; everything is derived
//! from a seed, so two writes with the same seed are byte-identical.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::corpus::serialize_scp;
use crate::dsp::{write_wav, AudioBuffer};
use crate::featurize::midi_to_hz;
use crate::score::{
    serialize_label, write_smf, LabelEntry, LabelSequence, NoteEvent, NoteSequence, Pitch,
};

/// Sampling rate of the generated audio. Deliberately above the pipeline's
/// default target rate so stage 2 exercises the resampler.
pub const DEMO_SAMPLE_RATE_HZ: u32 = 48_000;

const VOWELS: [&str; 5] = ["a", "i", "u", "e", "o"];
const SILENCES: [&str; 2] = ["sil", "pau"];
// A pentatonic-ish pitch pool around A3-A5; keeps melodies singable and
// the F0 tracker comfortably in range.
const SCALE: [u8; 10] = [57, 60, 62, 64, 67, 69, 72, 74, 76, 79];

/// One generated song with its ground-truth score and labels.
#[derive(Debug, Clone)]
pub struct DemoSong {
    pub utt_id: String,
    pub notes: NoteSequence,
    pub labels: LabelSequence,
    pub singer_id: String,
    pub lang_id: String,
}

/// The corpus as written: split name → songs, in output order.
#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub splits: Vec<(String, Vec<DemoSong>)>,
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn generate_song(utt_id: &str, singer_id: &str, lang_id: &str, rng: &mut ChaCha20Rng) -> DemoSong {
    let mut events = Vec::new();
    let mut entries = Vec::new();
    let mut t = 0.0f64;

    let push_silence =
        |t: &mut f64, dur: f64, entries: &mut Vec<LabelEntry>, rng: &mut ChaCha20Rng| {
            let token = SILENCES[rng.gen_range(0..SILENCES.len())];
            entries.push(LabelEntry {
                phoneme: token.to_string(),
                start_s: *t,
                end_s: *t + dur,
            });
            *t += dur;
        };

    // Leading silence, shorter than any phrase gap.
    push_silence(&mut t, round_ms(rng.gen_range(0.2..0.4)), &mut entries, rng);

    let n_phrases = rng.gen_range(2..=3);
    for phrase in 0..n_phrases {
        if phrase > 0 {
            // Phrase gap: long enough for the segmenter to cut here.
            push_silence(&mut t, round_ms(rng.gen_range(0.7..0.9)), &mut entries, rng);
        }
        let n_notes = rng.gen_range(2..=4);
        for _ in 0..n_notes {
            let pitch = SCALE[rng.gen_range(0..SCALE.len())];
            let dur = round_ms(rng.gen_range(0.35..0.6));
            let vowel = VOWELS[rng.gen_range(0..VOWELS.len())];
            events.push(NoteEvent {
                pitch: Pitch::Note(pitch),
                onset_s: t,
                offset_s: t + dur,
                tempo_bpm: 120.0,
                beat_pos: (t * 2.0) % 4.0,
            });
            entries.push(LabelEntry {
                phoneme: vowel.to_string(),
                start_s: t,
                end_s: t + dur,
            });
            t += dur;
        }
    }

    push_silence(&mut t, round_ms(rng.gen_range(0.2..0.4)), &mut entries, rng);

    DemoSong {
        utt_id: utt_id.to_string(),
        notes: NoteSequence { events, total_s: t },
        labels: LabelSequence { entries },
        singer_id: singer_id.to_string(),
        lang_id: lang_id.to_string(),
    }
}

/// Renders a score as sine singing: each pitched note is a pure tone at
/// its equal-temperament frequency with 5 ms fade ramps; rests are
/// silence.
pub fn synthesize_song(notes: &NoteSequence, sample_rate_hz: u32) -> AudioBuffer {
    let sr = sample_rate_hz as f64;
    let n = (notes.total_s * sr).round() as usize;
    let mut samples = vec![0.0f64; n];
    const FADE_S: f64 = 0.005;
    const AMP: f64 = 0.4;
    for e in &notes.events {
        let Pitch::Note(_) = e.pitch else { continue };
        let freq = midi_to_hz(e.pitch).expect("pitched event");
        let start = (e.onset_s * sr).round() as usize;
        let end = ((e.offset_s * sr).round() as usize).min(n);
        for (s, sample) in samples.iter_mut().enumerate().take(end).skip(start) {
            let dt = s as f64 / sr - e.onset_s;
            let until_end = e.offset_s - s as f64 / sr;
            let env = (dt / FADE_S).min(until_end / FADE_S).clamp(0.0, 1.0);
            *sample = AMP * env * (2.0 * std::f64::consts::PI * freq * dt).sin();
        }
    }
    AudioBuffer::new(samples, sample_rate_hz)
}

fn write_split(dir: &Path, songs: &[DemoSong]) -> io::Result<()> {
    std::fs::create_dir_all(dir.join("audio"))?;
    std::fs::create_dir_all(dir.join("midi"))?;

    let mut wav_scp = BTreeMap::new();
    let mut midi_scp = BTreeMap::new();
    let mut utt2spk = BTreeMap::new();
    let mut utt2lang = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for song in songs {
        let audio = synthesize_song(&song.notes, DEMO_SAMPLE_RATE_HZ);
        std::fs::write(
            dir.join("audio").join(format!("{}.wav", song.utt_id)),
            write_wav(&audio),
        )?;
        std::fs::write(
            dir.join("midi").join(format!("{}.mid", song.utt_id)),
            write_smf(&song.notes),
        )?;
        wav_scp.insert(song.utt_id.clone(), format!("audio/{}.wav", song.utt_id));
        midi_scp.insert(song.utt_id.clone(), format!("midi/{}.mid", song.utt_id));
        utt2spk.insert(song.utt_id.clone(), song.singer_id.clone());
        utt2lang.insert(song.utt_id.clone(), song.lang_id.clone());
        labels.insert(song.utt_id.clone(), song.labels.clone());
    }
    std::fs::write(dir.join("wav.scp"), serialize_scp(&wav_scp))?;
    std::fs::write(dir.join("midi.scp"), serialize_scp(&midi_scp))?;
    std::fs::write(dir.join("utt2spk"), serialize_scp(&utt2spk))?;
    std::fs::write(dir.join("utt2lang"), serialize_scp(&utt2lang))?;
    std::fs::write(dir.join("label"), serialize_label(&labels))?;
    Ok(())
}

/// Writes the full demo corpus under `root`: five songs split 3/1/1 into
/// `train`/`dev`/`eval`, each split a self-contained data directory with
/// relative audio/midi references.
pub fn write_demo_corpus(root: &Path, seed: u64) -> io::Result<DemoCorpus> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let singers = ["alto", "alto", "tenor", "alto", "tenor"];
    let songs: Vec<DemoSong> = (0..5)
        .map(|i| generate_song(&format!("song{i}"), singers[i], "demo", &mut rng))
        .collect();

    let splits = vec![
        ("train".to_string(), songs[0..3].to_vec()),
        ("dev".to_string(), songs[3..4].to_vec()),
        ("eval".to_string(), songs[4..5].to_vec()),
    ];
    for (name, split_songs) in &splits {
        write_split(&root.join(name), split_songs)?;
    }
    Ok(DemoCorpus { splits })
}
