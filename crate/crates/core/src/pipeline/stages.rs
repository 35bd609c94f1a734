//! The individual recipe stages. Each stage reads only files written by
//! earlier stages (or the raw data directory), wipes its own output
//! directory first, and writes results in sorted utterance order so that
//! re-runs and different worker counts produce byte-identical artifacts.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::augment::pitch_shift_score;
use crate::corpus::{
    build_token_list, load_corpus, serialize_scp, CorpusError, TokenList, Utterance,
};
use crate::dsp::{
    griffin_lim, logmel, read_feature_dump, read_wav, resample, write_feature_dump, write_wav,
    AudioBuffer, DspError, MelSpectrogram,
};
use crate::featurize::{frame_level_features, FeaturizeError};
use crate::metrics::{evaluate, format_mean_line, format_report_line, MetricsError};
use crate::score::{
    normalize_score, parse_smf, segment_by_silence, serialize_label, write_smf, LabelSequence,
    ScoreError, DEFAULT_SILENCE_TOKENS,
};

use super::archive::{pack, ArchiveEntry, ArchiveError};
use super::config::{ConfigError, PipelineConfig};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("utterance {utt_id}: pipe-style refs are not supported here: {cmd:?}")]
    PipeRefUnsupported { utt_id: String, cmd: String },
    #[error("no utterances survived length filtering in split {split}")]
    AllFiltered { split: String },
    #[error("utterance {utt_id} has no partner in {dir}")]
    UnpairedUtterance { utt_id: String, dir: String },
    #[error("required artifact {0} is missing; run the earlier stages first")]
    MissingArtifact(String),
    #[error("bad feature dump {path}: {source}")]
    BadDump { path: PathBuf, source: DspError },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> StageError + '_ {
    move |source| StageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, StageError> {
    std::fs::read(path).map_err(io_at(path))
}

fn read_text(path: &Path) -> Result<String, StageError> {
    std::fs::read_to_string(path).map_err(io_at(path))
}

fn write_bytes(path: &Path, data: &[u8]) -> Result<(), StageError> {
    std::fs::write(path, data).map_err(io_at(path))
}

fn ensure_dir(path: &Path) -> Result<(), StageError> {
    std::fs::create_dir_all(path).map_err(io_at(path))
}

/// Clears and recreates a stage's output directory so stale files from a
/// previous run can never leak into this one.
fn reset_dir(path: &Path) -> Result<(), StageError> {
    if path.exists() {
        std::fs::remove_dir_all(path).map_err(io_at(path))?;
    }
    ensure_dir(path)
}

pub(crate) fn stage_dir(cfg: &PipelineConfig, n: u32) -> PathBuf {
    cfg.work_dir.join(format!("stage{n}"))
}

/// Resolves a manifest reference against the directory holding the
/// manifest. Kaldi-style pipe commands are parsed upstream but this
/// pipeline does not execute them.
fn resolve_ref(base: &Path, reference: &str, utt_id: &str) -> Result<PathBuf, StageError> {
    if reference.trim_end().ends_with('|') {
        return Err(StageError::PipeRefUnsupported {
            utt_id: utt_id.to_string(),
            cmd: reference.to_string(),
        });
    }
    Ok(base.join(reference))
}

fn require_dir(path: PathBuf, what: &str) -> Result<PathBuf, StageError> {
    if path.is_dir() {
        Ok(path)
    } else {
        Err(StageError::MissingArtifact(what.to_string()))
    }
}

fn sorted_files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, StageError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_at(dir))? {
        let entry = entry.map_err(io_at(dir))?;
        let path = entry.path();
        if path.is_file()
            && path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(suffix))
        {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name_str(path: &Path) -> &str {
    path.file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
}

/// Five Kaldi-style manifests, accumulated per split and flushed in one
/// sorted pass.
#[derive(Default)]
struct SplitManifests {
    wav: BTreeMap<String, String>,
    midi: BTreeMap<String, String>,
    spk: BTreeMap<String, String>,
    lang: BTreeMap<String, String>,
    labels: BTreeMap<String, LabelSequence>,
}

impl SplitManifests {
    fn insert(&mut self, u: &Utterance, audio_ref: String, midi_ref: String) {
        self.wav.insert(u.utt_id.clone(), audio_ref);
        self.midi.insert(u.utt_id.clone(), midi_ref);
        self.spk.insert(u.utt_id.clone(), u.singer_id.clone());
        self.lang.insert(u.utt_id.clone(), u.lang_id.clone());
        self.labels.insert(u.utt_id.clone(), u.labels.clone());
    }

    fn write(&self, dir: &Path) -> Result<(), StageError> {
        write_bytes(&dir.join("wav.scp"), serialize_scp(&self.wav).as_bytes())?;
        write_bytes(&dir.join("midi.scp"), serialize_scp(&self.midi).as_bytes())?;
        write_bytes(&dir.join("utt2spk"), serialize_scp(&self.spk).as_bytes())?;
        write_bytes(&dir.join("utt2lang"), serialize_scp(&self.lang).as_bytes())?;
        write_bytes(&dir.join("label"), serialize_label(&self.labels).as_bytes())?;
        Ok(())
    }
}

/// Stage 1: validate the raw data directory and republish its manifests
/// with references resolved to absolute paths.
pub(crate) fn run_prepare(cfg: &PipelineConfig) -> Result<(), StageError> {
    let out_root = stage_dir(cfg, 1);
    reset_dir(&out_root)?;
    for split in &cfg.splits {
        let src = cfg.data_dir.join(split);
        let corpus = load_corpus(&src)?;
        let mut manifests = SplitManifests::default();
        for u in &corpus.utterances {
            let audio = resolve_ref(&src, &u.audio_ref, &u.utt_id)?;
            let midi = resolve_ref(&src, &u.midi_ref, &u.utt_id)?;
            for path in [&audio, &midi] {
                if !path.is_file() {
                    return Err(StageError::Io {
                        path: path.clone(),
                        source: io::Error::new(io::ErrorKind::NotFound, "referenced file missing"),
                    });
                }
            }
            let audio = std::path::absolute(&audio).map_err(io_at(&audio))?;
            let midi = std::path::absolute(&midi).map_err(io_at(&midi))?;
            manifests.insert(
                u,
                audio.to_string_lossy().into_owned(),
                midi.to_string_lossy().into_owned(),
            );
        }
        let dir = out_root.join(split);
        ensure_dir(&dir)?;
        manifests.write(&dir)?;
    }
    Ok(())
}

/// Stage 2: resample to the target rate, segment at long silences, and
/// write per-segment audio, MIDI, and labels with `<utt>_seg<k>` ids.
/// Score-level pitch augmentation, when configured, applies to the train
/// split only.
pub(crate) fn run_format(cfg: &PipelineConfig) -> Result<(), StageError> {
    struct SegmentOut {
        id: String,
        wav: Vec<u8>,
        midi: Vec<u8>,
        labels: LabelSequence,
    }

    let in_root = stage_dir(cfg, 1);
    let out_root = stage_dir(cfg, 2);
    reset_dir(&out_root)?;
    let sr = cfg.sample_rate_hz;
    for split in &cfg.splits {
        let src = require_dir(in_root.join(split), &format!("stage1/{split}"))?;
        let corpus = load_corpus(&src)?;
        let shift = if split == "train" {
            cfg.augment.pitch_shift_semitones
        } else {
            0
        };

        let per_utt: Vec<(String, Vec<SegmentOut>, String, String)> = corpus
            .utterances
            .par_iter()
            .map(|u| -> Result<_, StageError> {
                let audio_path = resolve_ref(&src, &u.audio_ref, &u.utt_id)?;
                let raw = read_wav(&read_bytes(&audio_path)?)?;
                let audio = resample(&raw, sr);
                let midi_path = resolve_ref(&src, &u.midi_ref, &u.utt_id)?;
                let mut notes = normalize_score(&parse_smf(&read_bytes(&midi_path)?)?);
                if shift != 0 {
                    notes = pitch_shift_score(&notes, shift);
                }
                let segments =
                    segment_by_silence(&notes, &u.labels, cfg.min_sil_s, &DEFAULT_SILENCE_TOKENS);
                let mut outs = Vec::with_capacity(segments.len());
                for (k, seg) in segments.iter().enumerate() {
                    let lo = ((seg.start_s * sr as f64).round() as usize).min(audio.len());
                    let hi = ((seg.end_s * sr as f64).round() as usize).clamp(lo, audio.len());
                    let clip = AudioBuffer::new(audio.samples[lo..hi].to_vec(), sr);
                    outs.push(SegmentOut {
                        id: format!("{}_seg{:03}", u.utt_id, k),
                        wav: write_wav(&clip),
                        midi: write_smf(&seg.notes),
                        labels: seg.labels.clone(),
                    });
                }
                Ok((
                    u.utt_id.clone(),
                    outs,
                    u.singer_id.clone(),
                    u.lang_id.clone(),
                ))
            })
            .collect::<Result<_, _>>()?;

        let dir = out_root.join(split);
        ensure_dir(&dir.join("audio"))?;
        ensure_dir(&dir.join("midi"))?;
        let mut manifests = SplitManifests::default();
        let mut log = String::new();
        for (utt_id, segments, singer_id, lang_id) in &per_utt {
            log.push_str(&format!("{utt_id} {} segments\n", segments.len()));
            for seg in segments {
                write_bytes(&dir.join("audio").join(format!("{}.wav", seg.id)), &seg.wav)?;
                write_bytes(&dir.join("midi").join(format!("{}.mid", seg.id)), &seg.midi)?;
                let record = Utterance {
                    utt_id: seg.id.clone(),
                    audio_ref: format!("audio/{}.wav", seg.id),
                    midi_ref: format!("midi/{}.mid", seg.id),
                    labels: seg.labels.clone(),
                    singer_id: singer_id.clone(),
                    lang_id: lang_id.clone(),
                };
                manifests.insert(&record, record.audio_ref.clone(), record.midi_ref.clone());
            }
        }
        manifests.write(&dir)?;
        write_bytes(&dir.join("segments.log"), log.as_bytes())?;
    }
    Ok(())
}

/// Stage 3: drop train/dev segments whose labeled span falls outside
/// `[min_len_s, max_len_s]`, recording each removal. The eval split is
/// copied through untouched so evaluation pairing stays complete.
pub(crate) fn run_filter(cfg: &PipelineConfig) -> Result<(), StageError> {
    let in_root = stage_dir(cfg, 2);
    let out_root = stage_dir(cfg, 3);
    reset_dir(&out_root)?;
    for split in &cfg.splits {
        let src = require_dir(in_root.join(split), &format!("stage2/{split}"))?;
        let corpus = load_corpus(&src)?;
        let mut log = String::new();
        let mut kept: Vec<&Utterance> = Vec::new();
        for u in &corpus.utterances {
            let span = u.labels.span_s();
            if split != "eval" && span < cfg.min_len_s {
                log.push_str(&format!("{} span={span:.6} reason=too_short\n", u.utt_id));
            } else if split != "eval" && span > cfg.max_len_s {
                log.push_str(&format!("{} span={span:.6} reason=too_long\n", u.utt_id));
            } else {
                kept.push(u);
            }
        }
        if kept.is_empty() {
            return Err(StageError::AllFiltered {
                split: split.clone(),
            });
        }

        let dir = out_root.join(split);
        ensure_dir(&dir.join("audio"))?;
        ensure_dir(&dir.join("midi"))?;
        let mut manifests = SplitManifests::default();
        for u in kept {
            let audio_ref = format!("audio/{}.wav", u.utt_id);
            let midi_ref = format!("midi/{}.mid", u.utt_id);
            let audio_src = resolve_ref(&src, &u.audio_ref, &u.utt_id)?;
            let midi_src = resolve_ref(&src, &u.midi_ref, &u.utt_id)?;
            std::fs::copy(&audio_src, dir.join(&audio_ref)).map_err(io_at(&audio_src))?;
            std::fs::copy(&midi_src, dir.join(&midi_ref)).map_err(io_at(&midi_src))?;
            manifests.insert(u, audio_ref, midi_ref);
        }
        manifests.write(&dir)?;
        write_bytes(&dir.join("filtered.log"), log.as_bytes())?;
    }
    Ok(())
}

/// Stage 4: build the token list from the train split's phonemes.
pub(crate) fn run_tokens(cfg: &PipelineConfig) -> Result<(), StageError> {
    let train = require_dir(stage_dir(cfg, 3).join("train"), "stage3/train")?;
    let corpus = load_corpus(&train)?;
    let tokens = build_token_list(&[corpus])?;
    let out = stage_dir(cfg, 4);
    reset_dir(&out)?;
    write_bytes(&out.join("tokens.txt"), tokens.serialize().as_bytes())
}

/// Streaming (Welford) mean/variance over feature frames, mergeable
/// across utterances without revisiting data.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub n: u64,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, frame: ndarray::ArrayView1<f64>) {
        self.n += 1;
        let n = self.n as f64;
        for (d, &x) in frame.iter().enumerate() {
            let delta = x - self.mean[d];
            self.mean[d] += delta / n;
            self.m2[d] += delta * (x - self.mean[d]);
        }
    }

    /// Chan's parallel-merge update; merging in a fixed order keeps the
    /// result bit-stable regardless of how the inputs were produced.
    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for d in 0..self.mean.len() {
            let delta = other.mean[d] - self.mean[d];
            self.mean[d] += delta * nb / n;
            self.m2[d] += other.m2[d] + delta * delta * na * nb / n;
        }
        self.n += other.n;
    }

    /// Population variance; zero-length input gives zeros.
    pub fn variance(&self) -> Vec<f64> {
        if self.n == 0 {
            return vec![0.0; self.m2.len()];
        }
        self.m2
            .iter()
            .map(|&v| (v / self.n as f64).max(0.0))
            .collect()
    }
}

/// Train-split feature statistics plus per-utterance frame counts.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    pub n_utts: usize,
    pub total_frames: u64,
    pub frame_counts: BTreeMap<String, u64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn serialize_stats(stats: &StatsSummary) -> String {
    format!(
        "n_utts {}\ntotal_frames {}\nmean {}\nvariance {}\n",
        stats.n_utts,
        stats.total_frames,
        join_floats(&stats.mean),
        join_floats(&stats.variance),
    )
}

/// Stage 5: dump log-mel and frame-level score features for every split,
/// write per-utterance frame counts, and collect train-split statistics.
pub(crate) fn run_features(cfg: &PipelineConfig) -> Result<(), StageError> {
    let p = cfg.frame_params()?;
    let tokens_path = stage_dir(cfg, 4).join("tokens.txt");
    if !tokens_path.is_file() {
        return Err(StageError::MissingArtifact("stage4/tokens.txt".into()));
    }
    let tokens = TokenList::parse(&read_text(&tokens_path)?)?;

    let in_root = stage_dir(cfg, 3);
    let out_root = stage_dir(cfg, 5);
    reset_dir(&out_root)?;

    let mut train_stats: Option<StatsSummary> = None;
    for split in &cfg.splits {
        let src = require_dir(in_root.join(split), &format!("stage3/{split}"))?;
        let corpus = load_corpus(&src)?;

        struct UttOut {
            id: String,
            mel_dump: Vec<u8>,
            score_dump: Vec<u8>,
            frames: u64,
            stats: RunningStats,
        }
        let per_utt: Vec<UttOut> = corpus
            .utterances
            .par_iter()
            .map(|u| -> Result<UttOut, StageError> {
                let audio_path = resolve_ref(&src, &u.audio_ref, &u.utt_id)?;
                let audio = read_wav(&read_bytes(&audio_path)?)?;
                let mel = logmel(&audio, &p, cfg.n_mels, cfg.fmin_hz, cfg.fmax())?;

                let midi_path = resolve_ref(&src, &u.midi_ref, &u.utt_id)?;
                let notes = normalize_score(&parse_smf(&read_bytes(&midi_path)?)?);
                let ff = frame_level_features(&u.labels, &notes, &tokens, audio.len(), &p)?;
                debug_assert_eq!(ff.len(), mel.frames.nrows());

                let mut stats = RunningStats::new(cfg.n_mels);
                for row in mel.frames.rows() {
                    stats.push(row);
                }
                Ok(UttOut {
                    id: u.utt_id.clone(),
                    mel_dump: write_feature_dump(mel.frames.view()),
                    score_dump: write_feature_dump(ff.to_matrix().view()),
                    frames: mel.frames.nrows() as u64,
                    stats,
                })
            })
            .collect::<Result<_, _>>()?;

        let dir = out_root.join(split);
        ensure_dir(&dir.join("feats"))?;
        let mut counts = String::new();
        for out in &per_utt {
            write_bytes(
                &dir.join("feats").join(format!("{}.mel.mskf", out.id)),
                &out.mel_dump,
            )?;
            write_bytes(
                &dir.join("feats").join(format!("{}.score.mskf", out.id)),
                &out.score_dump,
            )?;
            counts.push_str(&format!("{} {}\n", out.id, out.frames));
        }
        write_bytes(&dir.join("utt2num_frames"), counts.as_bytes())?;

        if split == "train" {
            let mut merged = RunningStats::new(cfg.n_mels);
            let mut frame_counts = BTreeMap::new();
            for out in &per_utt {
                merged.merge(&out.stats);
                frame_counts.insert(out.id.clone(), out.frames);
            }
            train_stats = Some(StatsSummary {
                n_utts: per_utt.len(),
                total_frames: merged.n,
                frame_counts,
                mean: merged.mean.clone(),
                variance: merged.variance(),
            });
        }
    }

    let stats = train_stats.expect("config validation guarantees a train split");
    write_bytes(
        &out_root.join("stats.txt"),
        serialize_stats(&stats).as_bytes(),
    )
}

/// Stage 6: training is out of scope; emit a notice and copy the eval
/// split's ground-truth mel dumps through as the "model output" so the
/// vocoder and evaluation stages run in oracle-resynthesis mode.
pub(crate) fn run_train_stub(cfg: &PipelineConfig) -> Result<(), StageError> {
    let feats = require_dir(
        stage_dir(cfg, 5).join("eval").join("feats"),
        "stage5/eval/feats",
    )?;
    let out = stage_dir(cfg, 6);
    reset_dir(&out)?;
    ensure_dir(&out.join("output"))?;
    write_bytes(
        &out.join("NOTICE.txt"),
        b"No acoustic model is trained here: model training and neural\n\
          vocoders are out of scope for this toolkit. The dumps under\n\
          output/ are the eval split's ground-truth mel features copied\n\
          through unchanged (oracle resynthesis), which keeps the vocoder\n\
          and evaluation stages runnable and gives them a well-defined\n\
          regression baseline.\n",
    )?;
    for path in sorted_files_with_suffix(&feats, ".mel.mskf")? {
        let name = file_name_str(&path);
        let utt = name.strip_suffix(".mel.mskf").unwrap_or(name);
        std::fs::copy(&path, out.join("output").join(format!("{utt}.mskf")))
            .map_err(io_at(&path))?;
    }
    Ok(())
}

/// Stage 7: Griffin-Lim vocoding of every mel dump in stage 6's output.
/// The dumps themselves stay on disk for external vocoders.
pub(crate) fn run_vocoder(cfg: &PipelineConfig) -> Result<(), StageError> {
    let p = cfg.frame_params()?;
    let in_dir = require_dir(stage_dir(cfg, 6).join("output"), "stage6/output")?;
    let out = stage_dir(cfg, 7);
    reset_dir(&out)?;
    ensure_dir(&out.join("wav"))?;

    let dumps = sorted_files_with_suffix(&in_dir, ".mskf")?;
    let rendered: Vec<(String, Vec<u8>)> = dumps
        .par_iter()
        .map(|path| -> Result<_, StageError> {
            let frames =
                read_feature_dump(&read_bytes(path)?).map_err(|source| StageError::BadDump {
                    path: path.clone(),
                    source,
                })?;
            let mel = MelSpectrogram {
                n_mels: frames.ncols(),
                frames,
                params: p,
                fmin_hz: cfg.fmin_hz,
                fmax_hz: cfg.fmax(),
            };
            let audio = griffin_lim(&mel, cfg.griffin_lim_iters)?;
            let utt = file_name_str(path)
                .strip_suffix(".mskf")
                .unwrap_or_default()
                .to_string();
            Ok((utt, write_wav(&audio)))
        })
        .collect::<Result<_, _>>()?;

    for (utt, wav) in &rendered {
        write_bytes(&out.join("wav").join(format!("{utt}.wav")), wav)?;
    }
    Ok(())
}

/// Stage 8: evaluate stage 7's waveforms against the stage 3 eval
/// references and write the per-utterance + MEAN report.
pub(crate) fn run_evaluate(cfg: &PipelineConfig) -> Result<(), StageError> {
    let p = cfg.frame_params()?;
    let ref_dir = require_dir(stage_dir(cfg, 3).join("eval"), "stage3/eval")?;
    let hyp_dir = require_dir(stage_dir(cfg, 7).join("wav"), "stage7/wav")?;
    let corpus = load_corpus(&ref_dir)?;

    let mut hyp_paths: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in sorted_files_with_suffix(&hyp_dir, ".wav")? {
        let utt = file_name_str(&path)
            .strip_suffix(".wav")
            .unwrap_or_default()
            .to_string();
        hyp_paths.insert(utt, path);
    }
    for u in &corpus.utterances {
        if !hyp_paths.contains_key(&u.utt_id) {
            return Err(StageError::UnpairedUtterance {
                utt_id: u.utt_id.clone(),
                dir: "stage7/wav".into(),
            });
        }
    }
    for utt in hyp_paths.keys() {
        if corpus.get(utt).is_none() {
            return Err(StageError::UnpairedUtterance {
                utt_id: utt.clone(),
                dir: "stage3/eval".into(),
            });
        }
    }

    let reports: Vec<(String, crate::metrics::MetricsReport)> = corpus
        .utterances
        .par_iter()
        .map(|u| -> Result<_, StageError> {
            let ref_audio = read_wav(&read_bytes(&resolve_ref(
                &ref_dir,
                &u.audio_ref,
                &u.utt_id,
            )?)?)?;
            let hyp_audio = read_wav(&read_bytes(&hyp_paths[&u.utt_id])?)?;
            let report = evaluate(&ref_audio, &hyp_audio, &p)?;
            Ok((u.utt_id.clone(), report))
        })
        .collect::<Result<_, _>>()?;

    let out = stage_dir(cfg, 8);
    reset_dir(&out)?;
    let mut text = String::new();
    for (utt, report) in &reports {
        text.push_str(&format_report_line(utt, report));
        text.push('\n');
    }
    let only_reports: Vec<_> = reports.iter().map(|(_, r)| r.clone()).collect();
    text.push_str(&format_mean_line(&only_reports));
    text.push('\n');
    write_bytes(&out.join("report.txt"), text.as_bytes())
}

/// Stage 9: pack the run's durable artifacts — canonical config, token
/// list, statistics, evaluation report, frame counts, and all feature
/// dumps — into a deterministic tar archive.
pub(crate) fn run_pack(cfg: &PipelineConfig) -> Result<(), StageError> {
    let mut entries = vec![ArchiveEntry {
        name: "config.txt".into(),
        data: cfg.serialize_for_archive().into_bytes(),
    }];

    let mut require_file = |name: String, path: PathBuf| -> Result<(), StageError> {
        if !path.is_file() {
            return Err(StageError::MissingArtifact(name));
        }
        entries.push(ArchiveEntry {
            name,
            data: read_bytes(&path)?,
        });
        Ok(())
    };
    require_file("tokens.txt".into(), stage_dir(cfg, 4).join("tokens.txt"))?;
    require_file("stats.txt".into(), stage_dir(cfg, 5).join("stats.txt"))?;
    require_file("report.txt".into(), stage_dir(cfg, 8).join("report.txt"))?;
    for split in &cfg.splits {
        require_file(
            format!("utt2num_frames/{split}"),
            stage_dir(cfg, 5).join(split).join("utt2num_frames"),
        )?;
    }
    for split in &cfg.splits {
        let feats = require_dir(
            stage_dir(cfg, 5).join(split).join("feats"),
            &format!("stage5/{split}/feats"),
        )?;
        for path in sorted_files_with_suffix(&feats, ".mskf")? {
            entries.push(ArchiveEntry {
                name: format!("feats/{split}/{}", file_name_str(&path)),
                data: read_bytes(&path)?,
            });
        }
    }

    let out = stage_dir(cfg, 9);
    reset_dir(&out)?;
    let tar = pack(&entries)?;
    write_bytes(&out.join("package.tar"), &tar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn running_stats_match_a_two_pass_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let data = Array2::from_shape_fn((200, 8), |_| rng.gen_range(-5.0..5.0));
        let mut stats = RunningStats::new(8);
        for row in data.rows() {
            stats.push(row);
        }
        for d in 0..8 {
            let col: Vec<f64> = data.column(d).to_vec();
            let mean: f64 = col.iter().sum::<f64>() / col.len() as f64;
            let var: f64 =
                col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / col.len() as f64;
            assert!((stats.mean[d] - mean).abs() < 1e-9 * mean.abs().max(1.0));
            assert!((stats.variance()[d] - var).abs() < 1e-6 * var.max(1.0));
        }
    }

    #[test]
    fn merged_stats_equal_single_stream_stats() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let a = Array2::from_shape_fn((67, 4), |_| rng.gen_range(-2.0..2.0));
        let b = Array2::from_shape_fn((133, 4), |_| rng.gen_range(-2.0..2.0));
        let mut whole = RunningStats::new(4);
        for row in a.rows().into_iter().chain(b.rows()) {
            whole.push(row);
        }
        let mut left = RunningStats::new(4);
        for row in a.rows() {
            left.push(row);
        }
        let mut right = RunningStats::new(4);
        for row in b.rows() {
            right.push(row);
        }
        left.merge(&right);
        assert_eq!(left.n, whole.n);
        for d in 0..4 {
            assert!((left.mean[d] - whole.mean[d]).abs() < 1e-12);
            assert!((left.variance()[d] - whole.variance()[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_input_has_zero_variance() {
        let mut stats = RunningStats::new(3);
        let frame = ndarray::arr1(&[2.0, -1.0, 0.5]);
        for _ in 0..50 {
            stats.push(frame.view());
        }
        assert_eq!(stats.mean, vec![2.0, -1.0, 0.5]);
        assert!(stats.variance().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn merging_an_empty_accumulator_is_a_no_op() {
        let mut stats = RunningStats::new(2);
        stats.push(ndarray::arr1(&[1.0, 2.0]).view());
        let before = stats.clone();
        stats.merge(&RunningStats::new(2));
        assert_eq!(stats, before);
        let mut empty = RunningStats::new(2);
        empty.merge(&before);
        assert_eq!(empty, before);
    }

    #[test]
    fn pipe_refs_are_rejected() {
        let err = resolve_ref(Path::new("/data"), "sox a.flac -t wav - |", "utt1").unwrap_err();
        assert!(matches!(err, StageError::PipeRefUnsupported { .. }));
    }

    #[test]
    fn plain_refs_resolve_against_the_manifest_dir() {
        let p = resolve_ref(Path::new("/data/train"), "audio/u.wav", "u").unwrap();
        assert_eq!(p, Path::new("/data/train/audio/u.wav"));
        let abs = resolve_ref(Path::new("/data/train"), "/elsewhere/u.wav", "u").unwrap();
        assert_eq!(abs, Path::new("/elsewhere/u.wav"));
    }

    #[test]
    fn stats_serialization_is_plain_text() {
        let stats = StatsSummary {
            n_utts: 2,
            total_frames: 10,
            frame_counts: BTreeMap::from([("a".into(), 4), ("b".into(), 6)]),
            mean: vec![1.5, -2.0],
            variance: vec![0.25, 0.0],
        };
        assert_eq!(
            serialize_stats(&stats),
            "n_utts 2\ntotal_frames 10\nmean 1.5 -2\nvariance 0.25 0\n"
        );
    }
}
