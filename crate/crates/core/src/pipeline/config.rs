//! Pipeline configuration: flat `key = value` files with `#` comments,
//! CLI overrides, validation, and the canonical serialized form that goes
//! into the result archive.

use std::path::PathBuf;

use thiserror::Error;

use crate::augment::AugmentSpec;
use crate::dsp::{FrameParams, DEFAULT_FMIN_HZ, DEFAULT_GRIFFIN_LIM_ITERS, DEFAULT_N_MELS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// Everything the stage runner needs. Built from defaults, then a config
/// file, then CLI flags — later sources win.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub work_dir: PathBuf,
    pub stage: u32,
    pub stop_stage: u32,
    pub sample_rate_hz: u32,
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    /// Upper mel edge; `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    pub min_len_s: f64,
    pub max_len_s: f64,
    pub min_sil_s: f64,
    pub griffin_lim_iters: usize,
    pub augment: AugmentSpec,
    pub n_workers: usize,
    pub splits: Vec<String>,
    /// Frame budget per non-final phoneme for the rule-based duration
    /// splitter; carried in the archive for downstream duration tooling.
    pub consonant_frames: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::new(),
            work_dir: PathBuf::new(),
            stage: 1,
            stop_stage: 9,
            sample_rate_hz: 24_000,
            n_fft: 1024,
            win_length: 1024,
            hop_length: 256,
            n_mels: DEFAULT_N_MELS,
            fmin_hz: DEFAULT_FMIN_HZ,
            fmax_hz: None,
            min_len_s: 0.5,
            max_len_s: 30.0,
            min_sil_s: 0.5,
            griffin_lim_iters: DEFAULT_GRIFFIN_LIM_ITERS,
            augment: AugmentSpec::default(),
            n_workers: 1,
            splits: vec!["train".into(), "dev".into(), "eval".into()],
            consonant_frames: 3,
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl PipelineConfig {
    /// Applies one `key = value` pair; shared by the file parser and the
    /// CLI flag merge.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "work_dir" => self.work_dir = PathBuf::from(value),
            "stage" => self.stage = parse_as(key, value)?,
            "stop_stage" => self.stop_stage = parse_as(key, value)?,
            "sample_rate_hz" => self.sample_rate_hz = parse_as(key, value)?,
            "n_fft" => self.n_fft = parse_as(key, value)?,
            "win_length" => self.win_length = parse_as(key, value)?,
            "hop_length" => self.hop_length = parse_as(key, value)?,
            "n_mels" => self.n_mels = parse_as(key, value)?,
            "fmin_hz" => self.fmin_hz = parse_as(key, value)?,
            "fmax_hz" => {
                self.fmax_hz = if value == "nyquist" {
                    None
                } else {
                    Some(parse_as(key, value)?)
                };
            }
            "min_len_s" => self.min_len_s = parse_as(key, value)?,
            "max_len_s" => self.max_len_s = parse_as(key, value)?,
            "min_sil_s" => self.min_sil_s = parse_as(key, value)?,
            "griffin_lim_iters" => self.griffin_lim_iters = parse_as(key, value)?,
            "pitch_shift" => self.augment.pitch_shift_semitones = parse_as(key, value)?,
            "mixup_alpha" => self.augment.mixup_alpha = parse_as(key, value)?,
            "seed" => self.augment.seed = parse_as(key, value)?,
            "n_workers" => self.n_workers = parse_as(key, value)?,
            "splits" => {
                let parts: Vec<String> = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                if parts.is_empty() {
                    return Err(ConfigError::BadValue {
                        key: key.to_string(),
                        value: value.to_string(),
                    });
                }
                self.splits = parts;
            }
            "consonant_frames" => self.consonant_frames = parse_as(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a whole config file on top of the current values. Lines are
    /// `key = value`; `#` starts a comment; blank lines are skipped;
    /// unknown keys are errors rather than silently ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Malformed { line: i + 1 })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The mel upper edge actually used: configured or Nyquist.
    pub fn fmax(&self) -> f64 {
        self.fmax_hz.unwrap_or(self.sample_rate_hz as f64 / 2.0)
    }

    pub fn frame_params(&self) -> Result<FrameParams, ConfigError> {
        FrameParams::new(
            self.sample_rate_hz,
            self.n_fft,
            self.win_length,
            self.hop_length,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.data_dir.as_os_str().is_empty() {
            return fail("data_dir is required");
        }
        if self.work_dir.as_os_str().is_empty() {
            return fail("work_dir is required");
        }
        if !(1..=9).contains(&self.stage) || !(1..=9).contains(&self.stop_stage) {
            return fail("stage and stop_stage must be between 1 and 9");
        }
        if self.stage > self.stop_stage {
            return fail("stage must not exceed stop_stage");
        }
        self.frame_params()?;
        if self.n_mels < 1 {
            return fail("n_mels must be at least 1");
        }
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax() && self.fmax() <= nyquist) {
            return fail("need 0 <= fmin_hz < fmax_hz <= sample_rate_hz/2");
        }
        if !(self.min_len_s >= 0.0 && self.min_len_s < self.max_len_s) {
            return fail("need 0 <= min_len_s < max_len_s");
        }
        if !(self.min_sil_s.is_finite() && self.min_sil_s > 0.0) {
            return fail("min_sil_s must be positive and finite");
        }
        if self.griffin_lim_iters < 1 {
            return fail("griffin_lim_iters must be at least 1");
        }
        if self.n_workers < 1 {
            return fail("n_workers must be at least 1");
        }
        if !(self.augment.mixup_alpha > 0.0 && self.augment.mixup_alpha.is_finite()) {
            return fail("mixup_alpha must be positive and finite");
        }
        if self.augment.pitch_shift_semitones.abs() > 12 {
            return fail("pitch_shift must be within [-12, 12]");
        }
        for required in ["train", "eval"] {
            if !self.splits.iter().any(|s| s == required) {
                return Err(ConfigError::Invalid(format!(
                    "splits must include {required:?}"
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.splits {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                return Err(ConfigError::Invalid(format!("bad split name {s:?}")));
            }
            if !seen.insert(s) {
                return Err(ConfigError::Invalid(format!("duplicate split {s:?}")));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text for the archive: sorted keys, machine-
    /// local settings (directories, stage addressing, worker count) left
    /// out so archives from equivalent runs are byte-identical.
    pub fn serialize_for_archive(&self) -> String {
        let fmax = match self.fmax_hz {
            Some(v) => v.to_string(),
            None => "nyquist".to_string(),
        };
        let pairs: Vec<(&str, String)> = vec![
            ("consonant_frames", self.consonant_frames.to_string()),
            ("fmax_hz", fmax),
            ("fmin_hz", self.fmin_hz.to_string()),
            ("griffin_lim_iters", self.griffin_lim_iters.to_string()),
            ("hop_length", self.hop_length.to_string()),
            ("max_len_s", self.max_len_s.to_string()),
            ("min_len_s", self.min_len_s.to_string()),
            ("min_sil_s", self.min_sil_s.to_string()),
            ("mixup_alpha", self.augment.mixup_alpha.to_string()),
            ("n_fft", self.n_fft.to_string()),
            ("n_mels", self.n_mels.to_string()),
            (
                "pitch_shift",
                self.augment.pitch_shift_semitones.to_string(),
            ),
            ("sample_rate_hz", self.sample_rate_hz.to_string()),
            ("seed", self.augment.seed.to_string()),
            ("splits", self.splits.join(",")),
            ("win_length", self.win_length.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}
