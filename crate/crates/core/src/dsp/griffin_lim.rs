//! Griffin-Lim phase reconstruction from log-mel spectrograms.
//!
//! The log-mel input is exponentiated back to mel magnitudes, inverted to a
//! linear-frequency magnitude target (clamped pseudo-inverse of the
//! filterbank by default, with an optional multiplicative-update NNLS
//! refinement), and then phase is recovered by the classic alternating
//! projection: `x <- istft(M * e^{i phi})`, `phi <- angle(stft(x))` with a
//! zero phase start. The spectral distance `|| |stft(x)| - M ||_F` is
//! non-increasing over iterations, which the trace variant exposes for
//! verification.

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::{istft, mel_filterbank, stft, AudioBuffer, DspError, MelSpectrogram};

/// How mel magnitudes are mapped back to linear-frequency magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelInversion {
    /// Minimum-norm least squares via the filterbank pseudo-inverse, with
    /// negative values clamped to zero. The default.
    ClampedPinv,
    /// Clamped pseudo-inverse followed by the given number of
    /// multiplicative-update NNLS refinement sweeps.
    Nnls { iters: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct GriffinLimOptions {
    pub iters: usize,
    pub inversion: MelInversion,
    /// Output is scaled down if its peak exceeds this value; quiet signals
    /// are left untouched.
    pub peak_ceiling: f64,
}

impl Default for GriffinLimOptions {
    fn default() -> Self {
        Self {
            iters: super::DEFAULT_GRIFFIN_LIM_ITERS,
            inversion: MelInversion::ClampedPinv,
            peak_ceiling: 0.95,
        }
    }
}

/// Reconstructs audio from a log-mel spectrogram with `iters` iterations of
/// the default configuration.
pub fn griffin_lim(mel: &MelSpectrogram, iters: usize) -> Result<AudioBuffer, DspError> {
    let opts = GriffinLimOptions {
        iters,
        ..Default::default()
    };
    griffin_lim_with_trace(mel, &opts).map(|(audio, _)| audio)
}

/// As `griffin_lim`, but also returns the per-iteration spectral distance
/// `|| |stft(x_k)| - M ||_F`.
pub fn griffin_lim_with_trace(
    mel: &MelSpectrogram,
    opts: &GriffinLimOptions,
) -> Result<(AudioBuffer, Vec<f64>), DspError> {
    let p = &mel.params;
    if mel.frames.nrows() == 0 {
        return Ok((AudioBuffer::new(vec![], p.sample_rate_hz), vec![]));
    }
    let target = mel_to_linear_magnitude(mel, opts.inversion)?;
    let n_frames = target.nrows();
    let n_bins = target.ncols();

    // Zero-phase start: the spectrogram is the real-valued magnitude target.
    let mut spec = Array2::<Complex64>::default((n_frames, n_bins));
    for ((t, k), v) in target.indexed_iter() {
        spec[(t, k)] = Complex64::new(*v, 0.0);
    }

    let mut trace = Vec::with_capacity(opts.iters);
    let mut audio = if opts.iters == 0 {
        // Nothing to iterate: return the zero-phase reconstruction.
        istft(&spec, p)?
    } else {
        AudioBuffer::new(vec![], p.sample_rate_hz)
    };
    for _ in 0..opts.iters {
        audio = istft(&spec, p)?;
        if audio.samples.is_empty() {
            // Degenerate single-frame input: nothing to analyze.
            trace.push(frobenius_distance(&spec, &target));
            break;
        }
        let analyzed = stft(&audio, p)?;
        trace.push(frobenius_distance(&analyzed, &target));
        for ((t, k), v) in analyzed.indexed_iter() {
            let mag = v.norm();
            let phase = if mag > 0.0 {
                v / mag
            } else {
                Complex64::new(1.0, 0.0)
            };
            spec[(t, k)] = phase * target[(t, k)];
        }
    }

    let peak = audio.samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > opts.peak_ceiling {
        let scale = opts.peak_ceiling / peak;
        for v in &mut audio.samples {
            *v *= scale;
        }
    }
    Ok((audio, trace))
}

fn frobenius_distance(spec: &Array2<Complex64>, target: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for (v, t) in spec.iter().zip(target.iter()) {
        let d = v.norm() - t;
        acc += d * d;
    }
    acc.sqrt()
}

/// Inverts mel magnitudes to linear-frequency magnitudes.
pub fn mel_to_linear_magnitude(
    mel: &MelSpectrogram,
    inversion: MelInversion,
) -> Result<Array2<f64>, DspError> {
    let p = &mel.params;
    let fb = mel_filterbank(p, mel.n_mels, mel.fmin_hz, mel.fmax_hz)?;
    let n_frames = mel.frames.nrows();
    let n_mels = fb.nrows();
    let n_bins = fb.ncols();

    // Mel magnitudes back from the log domain.
    let mel_mag = mel.frames.mapv(f64::exp);

    // Minimum-norm least squares: s = fb^T (fb fb^T + eps I)^{-1} m.
    // The 80x80 Gram matrix is SPD, so a Cholesky solve is enough.
    let mut gram = fb.dot(&fb.t());
    let eps = 1e-10
        * gram
            .diag()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v))
            .max(1e-300);
    for i in 0..n_mels {
        gram[(i, i)] += eps;
    }
    let chol = cholesky(&gram).ok_or_else(|| {
        DspError::InvalidFrameParams("mel filterbank Gram matrix is not positive definite".into())
    })?;

    let mut out = Array2::<f64>::zeros((n_frames, n_bins));
    let mut y = vec![0.0f64; n_mels];
    for t in 0..n_frames {
        for i in 0..n_mels {
            y[i] = mel_mag[(t, i)];
        }
        cholesky_solve_in_place(&chol, &mut y);
        for k in 0..n_bins {
            let mut acc = 0.0;
            for i in 0..n_mels {
                acc += fb[(i, k)] * y[i];
            }
            out[(t, k)] = acc.max(0.0);
        }
    }

    if let MelInversion::Nnls { iters } = inversion {
        nnls_refine(&fb, &mel_mag, &mut out, iters);
    }
    Ok(out)
}

/// Multiplicative-update NNLS sweeps: `s <- s * (fb^T m) / (fb^T fb s)`.
/// Updates keep `s` nonnegative; zero entries are lifted slightly so they
/// can re-enter the support.
fn nnls_refine(fb: &Array2<f64>, mel_mag: &Array2<f64>, s: &mut Array2<f64>, iters: usize) {
    let n_frames = s.nrows();
    let n_bins = s.ncols();
    let n_mels = fb.nrows();
    const TINY: f64 = 1e-12;
    let mut num = vec![0.0f64; n_bins];
    let mut model = vec![0.0f64; n_mels];
    let mut den = vec![0.0f64; n_bins];
    for t in 0..n_frames {
        for k in 0..n_bins {
            let mut acc = 0.0;
            for i in 0..n_mels {
                acc += fb[(i, k)] * mel_mag[(t, i)];
            }
            num[k] = acc;
            if s[(t, k)] <= 0.0 {
                s[(t, k)] = TINY;
            }
        }
        for _ in 0..iters {
            for i in 0..n_mels {
                let mut acc = 0.0;
                for k in 0..n_bins {
                    acc += fb[(i, k)] * s[(t, k)];
                }
                model[i] = acc;
            }
            for k in 0..n_bins {
                let mut acc = 0.0;
                for i in 0..n_mels {
                    acc += fb[(i, k)] * model[i];
                }
                den[k] = acc;
            }
            for k in 0..n_bins {
                if den[k] > TINY {
                    s[(t, k)] *= num[k] / den[k];
                }
            }
        }
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix, or None if the matrix
/// is not positive definite.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` in place.
fn cholesky_solve_in_place(l: &Array2<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * b[k];
        }
        b[i] = sum / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= l[(k, i)] * b[k];
        }
        b[i] = sum / l[(i, i)];
    }
}
