//! Corpus data model: Kaldi-style manifests (`wav.scp`, `midi.scp`, `label`,
//! `utt2spk`, `utt2lang`), utterance records with singer/language tables, and
//! token-list generation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::score::{self, LabelSequence, ScoreError};

pub const BLANK_TOKEN: &str = "<blank>";
pub const UNK_TOKEN: &str = "<unk>";
pub const SOS_EOS_TOKEN: &str = "<sos/eos>";

/// Language id assigned when a corpus has no `utt2lang` file.
pub const DEFAULT_LANG_ID: &str = "und";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate manifest key {0}")]
    DuplicateKey(String),
    #[error("line {0}: manifest lines need an utt id, a space, and a value")]
    MalformedLine(usize),
    #[error("missing required corpus file {0}")]
    MissingFile(String),
    #[error("utterance {utt_id} is missing from {file}")]
    KeyMismatch { utt_id: String, file: String },
    #[error("utterance id {0:?} has characters outside [A-Za-z0-9_-]")]
    InvalidUttId(String),
    #[error("no phonemes found in any training corpus")]
    EmptyCorpus,
    #[error("invalid token list: {0}")]
    InvalidTokenList(String),
    #[error(transparent)]
    Label(#[from] ScoreError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// One corpus record: manifest references plus parsed labels. `audio_ref`
/// may be a pipe-style command (trailing `|`) as in Kaldi; it is carried
/// verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub utt_id: String,
    pub audio_ref: String,
    pub midi_ref: String,
    pub labels: LabelSequence,
    pub singer_id: String,
    pub lang_id: String,
}

/// A split's worth of utterances, sorted by utt_id, with singer/language
/// index tables built in first-appearance order over the sorted ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub split_name: String,
    pub utterances: Vec<Utterance>,
    pub singer_table: BTreeMap<String, usize>,
    pub lang_table: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, utt_id: &str) -> Option<&Utterance> {
        self.utterances
            .binary_search_by(|u| u.utt_id.as_str().cmp(utt_id))
            .ok()
            .map(|i| &self.utterances[i])
    }

    /// Rebuilds the singer/language tables after editing `utterances`.
    pub fn rebuild_tables(&mut self) {
        self.singer_table = first_appearance_table(self.utterances.iter().map(|u| &u.singer_id));
        self.lang_table = first_appearance_table(self.utterances.iter().map(|u| &u.lang_id));
    }
}

fn first_appearance_table<'a>(ids: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
    let mut table = BTreeMap::new();
    let mut next = 0usize;
    for id in ids {
        if !table.contains_key(id) {
            table.insert(id.clone(), next);
            next += 1;
        }
    }
    table
}

/// Phoneme inventory with the fixed specials: `<blank>` at 0, `<unk>` at 1,
/// `<sos/eos>` last, interior tokens unique and sorted by code point.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenList {
    pub tokens: Vec<String>,
}

impl TokenList {
    /// Index of `token`, or 1 (`<unk>`) when absent.
    pub fn token_to_id(&self, token: &str) -> usize {
        self.tokens.iter().position(|t| t == token).unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// One token per line, LF-terminated, in list order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Parses a token file and checks the layout invariants.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let tokens: Vec<String> = text.lines().map(|l| l.to_string()).collect();
        let bad = |msg: &str| CorpusError::InvalidTokenList(msg.to_string());
        if tokens.len() < 3 {
            return Err(bad("need at least the three special tokens"));
        }
        if tokens[0] != BLANK_TOKEN {
            return Err(bad("first token must be <blank>"));
        }
        if tokens[1] != UNK_TOKEN {
            return Err(bad("second token must be <unk>"));
        }
        if tokens[tokens.len() - 1] != SOS_EOS_TOKEN {
            return Err(bad("last token must be <sos/eos>"));
        }
        let interior = &tokens[2..tokens.len() - 1];
        for w in interior.windows(2) {
            if w[0] >= w[1] {
                return Err(bad("interior tokens must be unique and sorted"));
            }
        }
        if interior
            .iter()
            .any(|t| t == BLANK_TOKEN || t == UNK_TOKEN || t == SOS_EOS_TOKEN)
        {
            return Err(bad("special token repeated in the interior"));
        }
        Ok(TokenList { tokens })
    }
}

/// Collects every phoneme appearing in the given (training) corpora into a
/// TokenList. Deterministic: interior tokens are code-point sorted.
pub fn build_token_list(corpora: &[Corpus]) -> Result<TokenList, CorpusError> {
    let mut set: BTreeSet<String> = BTreeSet::new();
    for c in corpora {
        for u in &c.utterances {
            for e in &u.labels.entries {
                set.insert(e.phoneme.clone());
            }
        }
    }
    set.remove(BLANK_TOKEN);
    set.remove(UNK_TOKEN);
    set.remove(SOS_EOS_TOKEN);
    if set.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut tokens = vec![BLANK_TOKEN.to_string(), UNK_TOKEN.to_string()];
    tokens.extend(set);
    tokens.push(SOS_EOS_TOKEN.to_string());
    Ok(TokenList { tokens })
}

/// Parses an scp-style manifest: `<utt_id><space><rest-of-line>` per
/// nonempty line. The value is the verbatim remainder, so pipe-style
/// entries with embedded spaces survive.
pub fn parse_scp(text: &str) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(' ')
            .ok_or(CorpusError::MalformedLine(i + 1))?;
        if key.is_empty() {
            return Err(CorpusError::MalformedLine(i + 1));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CorpusError::DuplicateKey(key.to_string()));
        }
    }
    Ok(map)
}

/// Inverse of `parse_scp`; entries come out sorted by key.
pub fn serialize_scp(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in map {
        out.push_str(k);
        out.push(' ');
        out.push_str(v);
        out.push('\n');
    }
    out
}

fn valid_utt_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn read_manifest(dir: &Path, name: &str) -> Result<String, CorpusError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(CorpusError::MissingFile(name.to_string()));
    }
    std::fs::read_to_string(&path).map_err(|source| CorpusError::Io { path, source })
}

/// Loads a corpus split from a Kaldi-style data directory containing
/// `wav.scp`, `midi.scp`, `label`, and `utt2spk` (plus optional
/// `utt2lang`; absent means every utterance is language "und"). The join
/// across manifests is strict: any utt_id present in one file and missing
/// from another is an error, never silently dropped. The split name is the
/// directory's base name.
pub fn load_corpus(data_dir: &Path) -> Result<Corpus, CorpusError> {
    let wav = parse_scp(&read_manifest(data_dir, "wav.scp")?)?;
    let midi = parse_scp(&read_manifest(data_dir, "midi.scp")?)?;
    let labels = score::parse_label(&read_manifest(data_dir, "label")?)?;
    let spk = parse_scp(&read_manifest(data_dir, "utt2spk")?)?;
    let lang = match read_manifest(data_dir, "utt2lang") {
        Ok(text) => Some(parse_scp(&text)?),
        Err(CorpusError::MissingFile(_)) => None,
        Err(e) => return Err(e),
    };

    let mismatch = |utt_id: &str, file: &str| CorpusError::KeyMismatch {
        utt_id: utt_id.to_string(),
        file: file.to_string(),
    };
    for id in wav.keys() {
        if !valid_utt_id(id) {
            return Err(CorpusError::InvalidUttId(id.clone()));
        }
        if !midi.contains_key(id) {
            return Err(mismatch(id, "midi.scp"));
        }
        if !labels.contains_key(id) {
            return Err(mismatch(id, "label"));
        }
        if !spk.contains_key(id) {
            return Err(mismatch(id, "utt2spk"));
        }
        if let Some(lang) = &lang {
            if !lang.contains_key(id) {
                return Err(mismatch(id, "utt2lang"));
            }
        }
    }
    // Reverse direction: an id known elsewhere but absent from wav.scp.
    for keys in [
        midi.keys().collect::<Vec<_>>(),
        labels.keys().collect(),
        spk.keys().collect(),
        lang.as_ref()
            .map(|m| m.keys().collect())
            .unwrap_or_default(),
    ] {
        for id in keys {
            if !wav.contains_key(id) {
                return Err(mismatch(id, "wav.scp"));
            }
        }
    }

    // BTreeMap iteration gives the required utt_id order for free.
    let mut utterances = Vec::with_capacity(wav.len());
    for (id, audio_ref) in &wav {
        utterances.push(Utterance {
            utt_id: id.clone(),
            audio_ref: audio_ref.clone(),
            midi_ref: midi[id].clone(),
            labels: labels[id].clone(),
            singer_id: spk[id].clone(),
            lang_id: lang
                .as_ref()
                .map(|m| m[id].clone())
                .unwrap_or_else(|| DEFAULT_LANG_ID.to_string()),
        });
    }

    let split_name = data_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut corpus = Corpus {
        split_name,
        utterances,
        ..Default::default()
    };
    corpus.rebuild_tables();
    Ok(corpus)
}
