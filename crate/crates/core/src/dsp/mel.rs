//! Mel filterbank construction and log-mel feature extraction.
//!
//! The mel scale is `mel(f) = 2595 * log10(1 + f / 700)`; triangle centers
//! are spaced uniformly on it and each triangle is area-normalized by
//! `2 / (f_hi - f_lo)` so wider filters do not accumulate more energy.
//! Features are the natural log of floored mel magnitudes (not powers).

use ndarray::Array2;

use super::{stft, AudioBuffer, DspError, FrameParams, MelSpectrogram, LOG_FLOOR};

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Builds an `n_mels x (n_fft / 2 + 1)` triangular filterbank over
/// `[fmin_hz, fmax_hz]`.
pub fn mel_filterbank(
    p: &FrameParams,
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Result<Array2<f64>, DspError> {
    let nyquist = p.sample_rate_hz as f64 / 2.0;
    if n_mels == 0 {
        return Err(DspError::InvalidFrameParams(
            "n_mels must be positive".into(),
        ));
    }
    if !(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= nyquist) {
        return Err(DspError::BadRange {
            fmin: fmin_hz,
            fmax: fmax_hz,
            nyquist,
        });
    }

    let mel_lo = hz_to_mel(fmin_hz);
    let mel_hi = hz_to_mel(fmax_hz);
    let n_edges = n_mels + 2;
    let hz: Vec<f64> = (0..n_edges)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_edges - 1) as f64))
        .collect();

    let n_bins = p.n_bins();
    let bin_hz = p.sample_rate_hz as f64 / p.n_fft as f64;
    let mut fb = Array2::<f64>::zeros((n_mels, n_bins));
    for i in 0..n_mels {
        let (lo, center, hi) = (hz[i], hz[i + 1], hz[i + 2]);
        let norm = 2.0 / (hi - lo);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let rising = if center > lo {
                (f - lo) / (center - lo)
            } else {
                0.0
            };
            let falling = if hi > center {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                fb[(i, k)] = w * norm;
            }
        }
    }
    Ok(fb)
}

/// Log-mel spectrogram: `ln(max(fb * |stft|, floor))` per frame.
pub fn logmel(
    audio: &AudioBuffer,
    p: &FrameParams,
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Result<MelSpectrogram, DspError> {
    let fb = mel_filterbank(p, n_mels, fmin_hz, fmax_hz)?;
    let spec = stft(audio, p)?;
    let n_frames = spec.nrows();
    let n_bins = spec.ncols();
    let mut frames = Array2::<f64>::zeros((n_frames, n_mels));
    for t in 0..n_frames {
        for i in 0..n_mels {
            let mut acc = 0.0;
            for k in 0..n_bins {
                let w = fb[(i, k)];
                if w > 0.0 {
                    acc += w * spec[(t, k)].norm();
                }
            }
            frames[(t, i)] = acc.max(LOG_FLOOR).ln();
        }
    }
    Ok(MelSpectrogram {
        frames,
        params: *p,
        n_mels,
        fmin_hz,
        fmax_hz,
    })
}
