//! Per-frame F0 estimation (YIN-style).
//!
//! Each frame computes the cumulative-mean-normalized difference function
//! over lags covering [fmin, fmax], takes the first lag dipping under the
//! voicing threshold, walks downhill to the local minimum, and refines it
//! with parabolic interpolation. Frames with no dip under the threshold are
//! unvoiced and carry `f0 = 0`. Framing matches the STFT convention (frame
//! `t` centered on sample `t * hop`), so F0 tracks and log-mel spectrograms
//! of the same audio always have equal frame counts.

use super::{AudioBuffer, F0Track, FrameParams};

/// Voicing threshold on the normalized difference function.
pub const VOICING_THRESHOLD: f64 = 0.15;

/// Estimates F0 per frame. `fmin_hz`/`fmax_hz` bound the search lags;
/// callers should keep `fmax_hz` below the Nyquist frequency. Empty input
/// yields an empty track.
pub fn estimate_f0(audio: &AudioBuffer, p: &FrameParams, fmin_hz: f64, fmax_hz: f64) -> F0Track {
    let x = &audio.samples;
    if x.is_empty() {
        return F0Track {
            f0_hz: vec![],
            voiced: vec![],
            params: *p,
        };
    }
    let sr = p.sample_rate_hz as f64;
    let fmax = fmax_hz.min(sr / 2.0).max(1.0);
    let fmin = fmin_hz
        .max(sr / x.len().max(1) as f64)
        .min(fmax / 2.0)
        .max(1e-3);
    let tau_min = ((sr / fmax).floor() as usize).max(2);
    let tau_max = ((sr / fmin).ceil() as usize).max(tau_min + 2);

    let n_frames = p.n_frames(x.len());
    let mut f0 = Vec::with_capacity(n_frames);
    let mut voiced = Vec::with_capacity(n_frames);

    // Integration window length; the frame slice spans [c - tau_max, c + tau_max).
    let w = tau_max;
    let mut frame = vec![0.0f64; 2 * tau_max];
    let mut d = vec![0.0f64; tau_max + 1];
    let mut cmnd = vec![0.0f64; tau_max + 1];

    for t in 0..n_frames {
        let center = (t * p.hop_length) as isize;
        for (j, slot) in frame.iter_mut().enumerate() {
            let idx = center - tau_max as isize + j as isize;
            *slot = if idx >= 0 && (idx as usize) < x.len() {
                x[idx as usize]
            } else {
                0.0
            };
        }

        // Difference function d(tau) = sum_{j<w} (x_j - x_{j+tau})^2.
        for tau in 1..=tau_max {
            let mut acc = 0.0;
            for j in 0..w {
                let diff = frame[j] - frame[j + tau];
                acc += diff * diff;
            }
            d[tau] = acc;
        }

        // Cumulative-mean normalization; an all-zero frame normalizes to 1.
        cmnd[0] = 1.0;
        let mut running = 0.0;
        for tau in 1..=tau_max {
            running += d[tau];
            cmnd[tau] = if running > 0.0 {
                d[tau] * tau as f64 / running
            } else {
                1.0
            };
        }

        let mut best: Option<usize> = None;
        let mut tau = tau_min;
        while tau <= tau_max {
            if cmnd[tau] < VOICING_THRESHOLD {
                // Descend to the local minimum following the first dip.
                while tau < tau_max && cmnd[tau + 1] < cmnd[tau] {
                    tau += 1;
                }
                best = Some(tau);
                break;
            }
            tau += 1;
        }

        match best {
            Some(tau) => {
                let lag = refine_lag(&cmnd, tau, tau_min, tau_max);
                f0.push(sr / lag);
                voiced.push(true);
            }
            None => {
                f0.push(0.0);
                voiced.push(false);
            }
        }
    }

    F0Track {
        f0_hz: f0,
        voiced,
        params: *p,
    }
}

/// Parabolic interpolation of the minimum around integer lag `tau`.
fn refine_lag(cmnd: &[f64], tau: usize, tau_min: usize, tau_max: usize) -> f64 {
    if tau <= tau_min || tau >= tau_max {
        return tau as f64;
    }
    let (s0, s1, s2) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
    let denom = s0 - 2.0 * s1 + s2;
    if denom.abs() < 1e-15 {
        return tau as f64;
    }
    let delta = 0.5 * (s0 - s2) / denom;
    tau as f64 + delta.clamp(-1.0, 1.0)
}
