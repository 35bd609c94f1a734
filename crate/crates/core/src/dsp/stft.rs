//! Short-time Fourier transform and its least-squares inverse.
//!
//! Framing is centered: the signal is reflect-padded by `n_fft / 2` on both
//! ends and frame `t` starts at padded offset `t * hop`, so its window is
//! centered on original sample `t * hop`. A signal of `n` samples yields
//! `1 + n / hop` frames. The inverse applies the same window, overlap-adds,
//! normalizes by the summed squared window, and trims the padding, returning
//! `hop * (frames - 1)` samples; on an STFT of a real signal this
//! reconstructs the input to within floating-point rounding.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{AudioBuffer, DspError, FrameParams, WindowKind};

/// Periodic Hann window: `0.5 - 0.5 cos(2 pi n / len)`.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// The analysis window laid out in an `n_fft`-length buffer: the
/// `win_length` window sits centered, zero-padded on both sides.
fn padded_window(p: &FrameParams) -> Vec<f64> {
    let base = match p.window {
        WindowKind::Hann => hann_window(p.win_length),
    };
    let mut w = vec![0.0; p.n_fft];
    let offset = (p.n_fft - p.win_length) / 2;
    w[offset..offset + p.win_length].copy_from_slice(&base);
    w
}

/// Maps an arbitrary (possibly negative) index into [0, len) by reflecting
/// at the boundaries without repeating the edge sample.
fn reflect_index(i: isize, len: usize) -> usize {
    debug_assert!(len > 0);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// One-sided STFT. Rows are frames, columns the `n_fft / 2 + 1` bins.
pub fn stft(audio: &AudioBuffer, p: &FrameParams) -> Result<Array2<Complex64>, DspError> {
    let x = &audio.samples;
    if x.is_empty() {
        return Err(DspError::EmptySignal);
    }
    let pad = p.n_fft / 2;
    let n_frames = p.n_frames(x.len());
    let n_bins = p.n_bins();
    let window = padded_window(p);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(p.n_fft);
    let mut buf = vec![Complex64::default(); p.n_fft];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    let mut out = Array2::<Complex64>::default((n_frames, n_bins));
    for t in 0..n_frames {
        let start = (t * p.hop_length) as isize - pad as isize;
        for j in 0..p.n_fft {
            let idx = reflect_index(start + j as isize, x.len());
            buf[j] = Complex64::new(x[idx] * window[j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..n_bins {
            out[(t, k)] = buf[k];
        }
    }
    Ok(out)
}

/// Least-squares inverse STFT (windowed overlap-add with squared-window
/// normalization). Output length is `hop * (frames - 1)`.
pub fn istft(spec: &Array2<Complex64>, p: &FrameParams) -> Result<AudioBuffer, DspError> {
    let n_bins = p.n_bins();
    if spec.ncols() != n_bins {
        return Err(DspError::ShapeMismatch {
            expected: n_bins,
            got: spec.ncols(),
        });
    }
    let n_frames = spec.nrows();
    if n_frames == 0 {
        return Ok(AudioBuffer::new(vec![], p.sample_rate_hz));
    }
    let pad = p.n_fft / 2;
    let window = padded_window(p);
    let ola_len = (n_frames - 1) * p.hop_length + p.n_fft;
    let mut acc = vec![0.0f64; ola_len];
    let mut wsum = vec![0.0f64; ola_len];

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(p.n_fft);
    let mut buf = vec![Complex64::default(); p.n_fft];
    let mut scratch = vec![Complex64::default(); ifft.get_inplace_scratch_len()];
    let scale = 1.0 / p.n_fft as f64;

    for t in 0..n_frames {
        // Rebuild the full spectrum from the one-sided half (conjugate symmetry).
        for k in 0..n_bins {
            buf[k] = spec[(t, k)];
        }
        for k in 1..p.n_fft - n_bins + 1 {
            buf[p.n_fft - k] = spec[(t, k)].conj();
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * p.hop_length;
        for j in 0..p.n_fft {
            let w = window[j];
            acc[start + j] += buf[j].re * scale * w;
            wsum[start + j] += w * w;
        }
    }

    let out_len = (n_frames - 1) * p.hop_length;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let j = i + pad;
        if wsum[j] > 1e-12 {
            out.push(acc[j] / wsum[j]);
        } else {
            out.push(0.0);
        }
    }
    Ok(AudioBuffer::new(out, p.sample_rate_hz))
}
