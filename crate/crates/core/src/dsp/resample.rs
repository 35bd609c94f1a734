//! Polyphase windowed-sinc resampling.
//!
//! The kernel is a Blackman-windowed sinc evaluated from an oversampled
//! table with linear interpolation between entries, which keeps the
//! interpolation error far below the 16-bit noise floor while staying fully
//! deterministic. When downsampling, the cutoff is scaled below the target
//! Nyquist so aliasing stays inside the stopband.

use super::AudioBuffer;

/// Kernel half-width in source samples. 96 taps per side keeps the
/// transition band narrow enough that tones up to 0.4x the lower rate pass
/// with well under 1% amplitude error.
const HALF_WIDTH: usize = 96;
/// Table entries per source sample.
const TABLE_STEP: usize = 512;
/// Cutoff margin below Nyquist.
const ROLLOFF: f64 = 0.98;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn blackman(t: f64, half_width: f64) -> f64 {
    // Classic Blackman over [-half_width, half_width].
    let u = std::f64::consts::PI * t / half_width;
    0.42 + 0.5 * u.cos() + 0.08 * (2.0 * u).cos()
}

/// Converts `audio` to `target_hz`. The output has
/// `round(len * target / source)` samples; output sample `i` is the band-
/// limited interpolation of the source at time `i / target_hz`. Identical
/// rates return a bit-identical copy.
pub fn resample(audio: &AudioBuffer, target_hz: u32) -> AudioBuffer {
    assert!(target_hz > 0, "target rate must be positive");
    let src_hz = audio.sample_rate_hz;
    if src_hz == target_hz {
        return audio.clone();
    }
    let x = &audio.samples;
    let out_len = ((x.len() as f64) * target_hz as f64 / src_hz as f64).round() as usize;
    if x.is_empty() || out_len == 0 {
        return AudioBuffer::new(vec![], target_hz);
    }

    // Cutoff in cycles per source sample.
    let ratio = target_hz as f64 / src_hz as f64;
    let cutoff = 0.5 * ratio.min(1.0) * ROLLOFF;
    let half = HALF_WIDTH as f64;

    // Ideal low-pass with passband edge `cutoff` is 2c*sinc(2c*t); the
    // Blackman window bounds it to +-HALF_WIDTH. Tabulated for t >= 0.
    let n_entries = HALF_WIDTH * TABLE_STEP + 2;
    let mut table = Vec::with_capacity(n_entries);
    for j in 0..n_entries {
        let t = j as f64 / TABLE_STEP as f64;
        if t >= half {
            table.push(0.0);
        } else {
            table.push(2.0 * cutoff * sinc(2.0 * cutoff * t) * blackman(t, half));
        }
    }
    let kernel = |t: f64| -> f64 {
        let a = t.abs() * TABLE_STEP as f64;
        let j = a as usize;
        if j + 1 >= table.len() {
            return 0.0;
        }
        let frac = a - j as f64;
        table[j] + (table[j + 1] - table[j]) * frac
    };

    let step = src_hz as f64 / target_hz as f64;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let p = i as f64 * step;
        let center = p.floor() as isize;
        let mut acc = 0.0;
        for n in (center - HALF_WIDTH as isize + 1)..=(center + HALF_WIDTH as isize) {
            if n < 0 || n as usize >= x.len() {
                continue;
            }
            acc += x[n as usize] * kernel(p - n as f64);
        }
        out.push(acc);
    }
    AudioBuffer::new(out, target_hz)
}
