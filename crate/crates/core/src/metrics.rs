//! Objective evaluation: dynamic time warping on mel-cepstra and the
//! DTW-aligned metrics — mel-cepstral distortion, voiced/unvoiced error
//! rate, and log-F0 RMSE.

use ndarray::{s, Array2, ArrayView2};
use thiserror::Error;

use crate::dsp::{
    estimate_f0, logmel, resample, AudioBuffer, DspError, F0Track, FrameParams, MelSpectrogram,
    DEFAULT_F0_MAX_HZ, DEFAULT_F0_MIN_HZ, DEFAULT_FMIN_HZ, DEFAULT_N_MELS,
};

/// Cepstral coefficients kept for MCD (including c0, which the distance
/// itself excludes).
pub const DEFAULT_N_CEPSTRA: usize = 25;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot align empty feature sequences")]
    EmptyInput,
    #[error("feature dimension mismatch: {expected} vs {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("alignment path indexes frame ({i}, {j}) outside the inputs")]
    PathOutOfBounds { i: usize, j: usize },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// A monotone alignment between a reference of M frames and a hypothesis
/// of N frames: starts at (0,0), ends at (M−1,N−1), and each step advances
/// i, j, or both by exactly one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtwPath {
    pub pairs: Vec<(usize, usize)>,
}

impl DtwPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Combined per-utterance evaluation result. `n_pairs` counts the aligned
/// frame pairs where both sides are voiced — the support of `f0_rmse_log`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mcd_db: f64,
    pub vuv_error_pct: f64,
    pub f0_rmse_log: f64,
    pub n_pairs: usize,
}

fn euclidean(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Optimal alignment of two feature sequences under the symmetric step set
/// {(1,0), (0,1), (1,1)} with Euclidean local distance. Cost ties prefer
/// the diagonal step, then (1,0).
pub fn dtw_align(
    reference: ArrayView2<f64>,
    hypothesis: ArrayView2<f64>,
) -> Result<DtwPath, MetricsError> {
    dtw_align_impl(reference, hypothesis, None)
}

/// `dtw_align` restricted to a Sakoe-Chiba band: only cells with
/// |i − j| ≤ band are considered. The band is widened to |M − N| when
/// necessary so the end point stays reachable.
pub fn dtw_align_banded(
    reference: ArrayView2<f64>,
    hypothesis: ArrayView2<f64>,
    band: usize,
) -> Result<DtwPath, MetricsError> {
    dtw_align_impl(reference, hypothesis, Some(band))
}

fn dtw_align_impl(
    reference: ArrayView2<f64>,
    hypothesis: ArrayView2<f64>,
    band: Option<usize>,
) -> Result<DtwPath, MetricsError> {
    let (m, n) = (reference.nrows(), hypothesis.nrows());
    if m == 0 || n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    if reference.ncols() != hypothesis.ncols() {
        return Err(MetricsError::DimMismatch {
            expected: reference.ncols(),
            got: hypothesis.ncols(),
        });
    }
    let band = band.map(|b| b.max(m.abs_diff(n)));
    let in_band = |i: usize, j: usize| band.is_none_or(|b| i.abs_diff(j) <= b);

    // Backpointers: 0 = diagonal, 1 = (1,0) i.e. from (i−1,j), 2 = (0,1).
    let mut cost = Array2::from_elem((m, n), f64::INFINITY);
    let mut back = Array2::from_elem((m, n), 3u8);
    for i in 0..m {
        for j in 0..n {
            if !in_band(i, j) {
                continue;
            }
            let local = euclidean(reference.row(i), hypothesis.row(j));
            if i == 0 && j == 0 {
                cost[(0, 0)] = local;
                continue;
            }
            // Candidates in tie-break preference order.
            let mut best = f64::INFINITY;
            let mut step = 3u8;
            let candidates = [
                (i.checked_sub(1).zip(j.checked_sub(1)), 0u8),
                (i.checked_sub(1).map(|p| (p, j)), 1u8),
                (j.checked_sub(1).map(|p| (i, p)), 2u8),
            ];
            for (pred, tag) in candidates {
                if let Some((pi, pj)) = pred {
                    if cost[(pi, pj)] < best {
                        best = cost[(pi, pj)];
                        step = tag;
                    }
                }
            }
            if best.is_finite() {
                cost[(i, j)] = best + local;
                back[(i, j)] = step;
            }
        }
    }

    let mut pairs = vec![(m - 1, n - 1)];
    let (mut i, mut j) = (m - 1, n - 1);
    while (i, j) != (0, 0) {
        match back[(i, j)] {
            0 => {
                i -= 1;
                j -= 1;
            }
            1 => i -= 1,
            2 => j -= 1,
            _ => unreachable!("every reachable cell has a backpointer"),
        }
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(DtwPath { pairs })
}

/// Forward-order accumulated Euclidean cost of a path; the value
/// `dtw_align` minimized.
pub fn path_cost(reference: ArrayView2<f64>, hypothesis: ArrayView2<f64>, path: &DtwPath) -> f64 {
    let mut acc = 0.0;
    for &(i, j) in &path.pairs {
        acc += euclidean(reference.row(i), hypothesis.row(j));
    }
    acc
}

/// Mel-cepstral distortion in dB over an alignment: the mean of
/// (10/ln 10)·√(2·Σ_{d≥1} Δc_d²) across path pairs. Coefficient 0
/// (energy) is excluded.
pub fn mcd(
    ref_mcep: ArrayView2<f64>,
    hyp_mcep: ArrayView2<f64>,
    path: &DtwPath,
) -> Result<f64, MetricsError> {
    if ref_mcep.ncols() != hyp_mcep.ncols() {
        return Err(MetricsError::DimMismatch {
            expected: ref_mcep.ncols(),
            got: hyp_mcep.ncols(),
        });
    }
    if path.is_empty() {
        return Ok(0.0);
    }
    let factor = 10.0 / std::f64::consts::LN_10;
    let mut total = 0.0;
    for &(i, j) in &path.pairs {
        if i >= ref_mcep.nrows() || j >= hyp_mcep.nrows() {
            return Err(MetricsError::PathOutOfBounds { i, j });
        }
        let sq: f64 = ref_mcep
            .row(i)
            .iter()
            .zip(hyp_mcep.row(j).iter())
            .skip(1)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += factor * (2.0 * sq).sqrt();
    }
    Ok(total / path.pairs.len() as f64)
}

/// Percentage of aligned pairs whose voicing decisions disagree.
pub fn vuv_error(reference: &F0Track, hypothesis: &F0Track, path: &DtwPath) -> f64 {
    if path.is_empty() {
        return 0.0;
    }
    let mismatches = path
        .pairs
        .iter()
        .filter(|&&(i, j)| reference.voiced[i] != hypothesis.voiced[j])
        .count();
    100.0 * mismatches as f64 / path.pairs.len() as f64
}

/// RMSE of natural-log F0 over the pairs where both sides are voiced.
/// Returns the error and the number of such pairs; no co-voiced pairs
/// yields (0.0, 0).
pub fn f0_rmse(reference: &F0Track, hypothesis: &F0Track, path: &DtwPath) -> (f64, usize) {
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for &(i, j) in &path.pairs {
        if reference.voiced[i] && hypothesis.voiced[j] {
            let d = reference.f0_hz[i].ln() - hypothesis.f0_hz[j].ln();
            sum_sq += d * d;
            n += 1;
        }
    }
    if n == 0 {
        (0.0, 0)
    } else {
        ((sum_sq / n as f64).sqrt(), n)
    }
}

/// Orthonormal DCT-II of each log-mel frame, keeping `n_coeffs`
/// coefficients (clamped to the mel dimension).
pub fn mel_cepstra(mel: &MelSpectrogram, n_coeffs: usize) -> Array2<f64> {
    let n_mels = mel.n_mels;
    let keep = n_coeffs.min(n_mels).max(1);
    let n_frames = mel.frames.nrows();
    // DCT-II basis, orthonormal scaling.
    let mut basis = Array2::zeros((keep, n_mels));
    let norm0 = (1.0 / n_mels as f64).sqrt();
    let norm = (2.0 / n_mels as f64).sqrt();
    for k in 0..keep {
        for n in 0..n_mels {
            let angle =
                std::f64::consts::PI * (2.0 * n as f64 + 1.0) * k as f64 / (2.0 * n_mels as f64);
            basis[(k, n)] = if k == 0 { norm0 } else { norm } * angle.cos();
        }
    }
    let mut out = Array2::zeros((n_frames, keep));
    for t in 0..n_frames {
        for k in 0..keep {
            out[(t, k)] = basis.row(k).dot(&mel.frames.row(t));
        }
    }
    out
}

/// Full evaluation of a synthesized waveform against its reference:
/// mel-cepstra (25 coefficients) and F0 for both signals, one DTW path on
/// the cepstra excluding c0, and the three metrics over that shared path.
/// The hypothesis is resampled to the reference rate first when they
/// differ.
pub fn evaluate(
    ref_wav: &AudioBuffer,
    hyp_wav: &AudioBuffer,
    p: &FrameParams,
) -> Result<MetricsReport, MetricsError> {
    let hyp_resampled;
    let hyp: &AudioBuffer = if hyp_wav.sample_rate_hz == ref_wav.sample_rate_hz {
        hyp_wav
    } else {
        hyp_resampled = resample(hyp_wav, ref_wav.sample_rate_hz);
        &hyp_resampled
    };

    let fmax = ref_wav.sample_rate_hz as f64 / 2.0;
    let ref_mel = logmel(ref_wav, p, DEFAULT_N_MELS, DEFAULT_FMIN_HZ, fmax)?;
    let hyp_mel = logmel(hyp, p, DEFAULT_N_MELS, DEFAULT_FMIN_HZ, fmax)?;
    let ref_cep = mel_cepstra(&ref_mel, DEFAULT_N_CEPSTRA);
    let hyp_cep = mel_cepstra(&hyp_mel, DEFAULT_N_CEPSTRA);

    let path = dtw_align(ref_cep.slice(s![.., 1..]), hyp_cep.slice(s![.., 1..]))?;
    let mcd_db = mcd(ref_cep.view(), hyp_cep.view(), &path)?;

    let ref_f0 = estimate_f0(ref_wav, p, DEFAULT_F0_MIN_HZ, DEFAULT_F0_MAX_HZ);
    let hyp_f0 = estimate_f0(hyp, p, DEFAULT_F0_MIN_HZ, DEFAULT_F0_MAX_HZ);
    let vuv_error_pct = vuv_error(&ref_f0, &hyp_f0, &path);
    let (f0_rmse_log, n_pairs) = f0_rmse(&ref_f0, &hyp_f0, &path);

    Ok(MetricsReport {
        mcd_db,
        vuv_error_pct,
        f0_rmse_log,
        n_pairs,
    })
}

/// One report-file line: `utt_id mcd vuv_e f0rmse`, four decimal places.
pub fn format_report_line(utt_id: &str, r: &MetricsReport) -> String {
    format!(
        "{} {:.4} {:.4} {:.4}",
        utt_id, r.mcd_db, r.vuv_error_pct, r.f0_rmse_log
    )
}

/// The trailing `MEAN` line: unweighted means over the per-utterance
/// reports.
pub fn format_mean_line(reports: &[MetricsReport]) -> String {
    let n = reports.len().max(1) as f64;
    let mcd: f64 = reports.iter().map(|r| r.mcd_db).sum::<f64>() / n;
    let vuv: f64 = reports.iter().map(|r| r.vuv_error_pct).sum::<f64>() / n;
    let f0: f64 = reports.iter().map(|r| r.f0_rmse_log).sum::<f64>() / n;
    format!("MEAN {mcd:.4} {vuv:.4} {f0:.4}")
}
