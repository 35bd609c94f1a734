//! Signal processing: WAV I/O, resampling, STFT/ISTFT, log-mel features,
//! F0 tracking, Griffin-Lim phase reconstruction, and the binary feature
//! dump format used between pipeline stages.
//!
//! All numeric work is done in f64 so round trips (ISTFT of STFT, WAV
//! quantization, dump/load) stay well inside the documented tolerances.
//! Dumped features are stored as f32 on disk; that cast is the only place
//! precision is dropped.

use thiserror::Error;

pub mod dump;
pub mod f0;
pub mod griffin_lim;
pub mod mel;
pub mod resample;
pub mod stft;
pub mod wav;

pub use dump::{read_feature_dump, write_feature_dump};
pub use f0::estimate_f0;
pub use griffin_lim::{
    griffin_lim, griffin_lim_with_trace, mel_to_linear_magnitude, GriffinLimOptions, MelInversion,
};
pub use mel::{hz_to_mel, logmel, mel_filterbank, mel_to_hz};
pub use resample::resample;
pub use stft::{hann_window, istft, stft};
pub use wav::{read_wav, write_wav};

pub use rustfft::num_complex::Complex64;

/// Default mel band count for acoustic features.
pub const DEFAULT_N_MELS: usize = 80;
/// Default lower edge of the mel filterbank in Hz.
pub const DEFAULT_FMIN_HZ: f64 = 80.0;
/// Floor applied to mel magnitudes before taking the natural log.
pub const LOG_FLOOR: f64 = 1e-10;
/// Default Griffin-Lim iteration count.
pub const DEFAULT_GRIFFIN_LIM_ITERS: usize = 32;
/// Default F0 search range in Hz.
pub const DEFAULT_F0_MIN_HZ: f64 = 50.0;
pub const DEFAULT_F0_MAX_HZ: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("not a RIFF/WAVE file")]
    NotRiff,
    #[error("unsupported codec tag {0:#06x} (PCM16 and float32 are supported)")]
    UnsupportedCodec(u16),
    #[error("unsupported bit depth {0}")]
    UnsupportedBitDepth(u16),
    #[error("file truncated")]
    Truncated,
    #[error("missing `{0}` chunk")]
    MissingChunk(&'static str),
    #[error("empty signal")]
    EmptySignal,
    #[error("spectrogram shape mismatch: expected {expected} frequency bins, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid frame parameters: {0}")]
    InvalidFrameParams(String),
    #[error("invalid mel range: fmin {fmin} Hz, fmax {fmax} Hz with Nyquist {nyquist} Hz")]
    BadRange { fmin: f64, fmax: f64, nyquist: f64 },
    #[error("bad feature dump: {0}")]
    BadDump(String),
}

/// Mono audio with its sample rate. Samples are nominally in [-1, 1] but the
/// type does not clamp; `write_wav` clips at the quantization boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Periodic Hann window.
    Hann,
}

/// Short-time analysis geometry shared by the STFT, log-mel extraction, and
/// the F0 tracker. Frames are centered: frame `t` is centered on sample
/// `t * hop_length`, and a signal of `n` samples yields `1 + n / hop_length`
/// frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub sample_rate_hz: u32,
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub window: WindowKind,
}

impl FrameParams {
    /// Validates the geometry: `n_fft` must be a power of two,
    /// `win_length <= n_fft`, and `hop_length` must divide `win_length`
    /// with an integer factor of at least 2 (the overlap-add constraint).
    pub fn new(
        sample_rate_hz: u32,
        n_fft: usize,
        win_length: usize,
        hop_length: usize,
    ) -> Result<Self, DspError> {
        if sample_rate_hz == 0 {
            return Err(DspError::InvalidFrameParams(
                "sample rate must be positive".into(),
            ));
        }
        if n_fft == 0 || !n_fft.is_power_of_two() {
            return Err(DspError::InvalidFrameParams(format!(
                "n_fft must be a positive power of two, got {n_fft}"
            )));
        }
        if win_length == 0 || win_length > n_fft {
            return Err(DspError::InvalidFrameParams(format!(
                "win_length must be in 1..=n_fft, got {win_length} with n_fft {n_fft}"
            )));
        }
        if hop_length == 0 || !win_length.is_multiple_of(hop_length) || win_length / hop_length < 2
        {
            return Err(DspError::InvalidFrameParams(format!(
                "hop_length must divide win_length with a factor >= 2, got hop {hop_length} win {win_length}"
            )));
        }
        Ok(Self {
            sample_rate_hz,
            n_fft,
            win_length,
            hop_length,
            window: WindowKind::Hann,
        })
    }

    /// 1024/1024/256 analysis at the given rate.
    pub fn with_defaults(sample_rate_hz: u32) -> Self {
        Self::new(sample_rate_hz, 1024, 1024, 256).expect("default geometry is valid")
    }

    /// Number of one-sided frequency bins.
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count for a signal of `n_samples` samples.
    pub fn n_frames(&self, n_samples: usize) -> usize {
        1 + n_samples / self.hop_length
    }

    /// Time of frame `t`'s center in seconds.
    pub fn frame_time_s(&self, t: usize) -> f64 {
        (t * self.hop_length) as f64 / self.sample_rate_hz as f64
    }
}

/// Log-mel spectrogram: `frames` is (n_frames x n_mels), natural-log of
/// floored mel magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: ndarray::Array2<f64>,
    pub params: FrameParams,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }
}

/// Per-frame F0 estimate aligned with the spectrogram framing. Unvoiced
/// frames carry `f0_hz == 0.0` and `voiced == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub params: FrameParams,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    /// Fraction of frames marked voiced, in [0, 1]. Empty tracks count as 0.
    pub fn voiced_ratio(&self) -> f64 {
        if self.voiced.is_empty() {
            return 0.0;
        }
        self.voiced.iter().filter(|v| **v).count() as f64 / self.voiced.len() as f64
    }
}
