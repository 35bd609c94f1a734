//! Minimal RIFF/WAVE reader and writer.
//!
//! Reading accepts PCM 16-bit and IEEE float 32-bit, any channel count
//! (channels are averaged to mono). Writing always emits mono PCM 16-bit
//! with round-half-away-from-zero quantization and clipping at full scale.
//! 16-bit samples map to floats as `s / 32768`, so integer-representable
//! data survives a write/read round trip exactly.

use super::{AudioBuffer, DspError};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DspError> {
        if self.data.len() - self.pos < n {
            return Err(DspError::Truncated);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16_le(&mut self) -> Result<u16, DspError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32_le(&mut self) -> Result<u32, DspError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

struct Format {
    codec: u16,
    channels: u16,
    sample_rate_hz: u32,
    bits_per_sample: u16,
}

/// Decodes a WAV file into a mono `AudioBuffer`.
///
/// Multichannel input is averaged to mono sample by sample. Non-finite float
/// samples are mapped to 0 so downstream invariants (finite features) hold.
pub fn read_wav(bytes: &[u8]) -> Result<AudioBuffer, DspError> {
    let mut r = Reader::new(bytes);
    let riff = r.take(4).map_err(|_| DspError::NotRiff)?;
    if riff != b"RIFF" {
        return Err(DspError::NotRiff);
    }
    let _riff_size = r.u32_le().map_err(|_| DspError::NotRiff)?;
    let wave = r.take(4).map_err(|_| DspError::NotRiff)?;
    if wave != b"WAVE" {
        return Err(DspError::NotRiff);
    }

    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    while r.remaining() >= 8 {
        let id: [u8; 4] = r.take(4)?.try_into().unwrap();
        let size = r.u32_le()? as usize;
        let body = r.take(size)?;
        // Chunks are word-aligned; odd sizes are followed by a pad byte.
        if size % 2 == 1 && r.remaining() > 0 {
            r.take(1)?;
        }
        match &id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(DspError::Truncated);
                }
                let mut fr = Reader::new(body);
                let codec = fr.u16_le()?;
                let channels = fr.u16_le()?;
                let sample_rate_hz = fr.u32_le()?;
                let _byte_rate = fr.u32_le()?;
                let _block_align = fr.u16_le()?;
                let bits_per_sample = fr.u16_le()?;
                format = Some(Format {
                    codec,
                    channels,
                    sample_rate_hz,
                    bits_per_sample,
                });
            }
            b"data" => {
                data = Some(body);
                // Keep scanning: a fmt chunk after data is unusual but legal.
            }
            _ => {}
        }
    }

    let fmt = format.ok_or(DspError::MissingChunk("fmt "))?;
    let data = data.ok_or(DspError::MissingChunk("data"))?;
    if fmt.channels == 0 || fmt.sample_rate_hz == 0 {
        return Err(DspError::UnsupportedCodec(fmt.codec));
    }

    let decode_i16 = match (fmt.codec, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => true,
        (FORMAT_IEEE_FLOAT, 32) => false,
        (FORMAT_PCM, bits) => return Err(DspError::UnsupportedBitDepth(bits)),
        (FORMAT_IEEE_FLOAT, bits) => return Err(DspError::UnsupportedBitDepth(bits)),
        (FORMAT_EXTENSIBLE, _) => return Err(DspError::UnsupportedCodec(FORMAT_EXTENSIBLE)),
        (codec, _) => return Err(DspError::UnsupportedCodec(codec)),
    };

    let bytes_per_sample = if decode_i16 { 2 } else { 4 };
    let frame_bytes = bytes_per_sample * fmt.channels as usize;
    let n_frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0f64;
        for c in 0..fmt.channels as usize {
            let off = f * frame_bytes + c * bytes_per_sample;
            let v = if decode_i16 {
                let s = i16::from_le_bytes([data[off], data[off + 1]]);
                s as f64 / 32768.0
            } else {
                let s =
                    f32::from_le_bytes([data[off], data[off + 1], data[off + 2], data[off + 3]]);
                if s.is_finite() {
                    s as f64
                } else {
                    0.0
                }
            };
            acc += v;
        }
        samples.push(acc / fmt.channels as f64);
    }

    Ok(AudioBuffer::new(samples, fmt.sample_rate_hz))
}

/// Quantizes one sample to PCM16 with round-half-away-from-zero and clipping.
fn quantize(x: f64) -> i16 {
    let clipped = x.clamp(-1.0, 1.0);
    // f64::round rounds half away from zero, which is the documented behavior.
    let scaled = (clipped * 32768.0).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Encodes a mono PCM 16-bit WAV file.
pub fn write_wav(audio: &AudioBuffer) -> Vec<u8> {
    let n = audio.samples.len();
    let data_size = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&audio.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate_hz * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &x in &audio.samples {
        out.extend_from_slice(&quantize(x).to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_file(rate: u32, channels: u16, samples: &[i16]) -> Vec<u8> {
        let data_size = (samples.len() * 2) as u32;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_size).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_size.to_le_bytes());
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn reads_pcm16_with_exact_scaling() {
        let file = pcm16_file(16000, 1, &[0, 16384, -32768]);
        let audio = read_wav(&file).unwrap();
        assert_eq!(audio.sample_rate_hz, 16000);
        assert_eq!(audio.samples, vec![0.0, 0.5, -1.0]);
    }

    #[test]
    fn averages_stereo_to_mono() {
        let file = pcm16_file(8000, 2, &[16384, -16384, 32000, 32000]);
        let audio = read_wav(&file).unwrap();
        assert_eq!(audio.samples.len(), 2);
        assert_eq!(audio.samples[0], 0.0);
        assert!((audio.samples[1] - 32000.0 / 32768.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_rifx_byte_order() {
        let mut file = pcm16_file(8000, 1, &[0]);
        file[0..4].copy_from_slice(b"RIFX");
        assert!(matches!(read_wav(&file), Err(DspError::NotRiff)));
    }

    #[test]
    fn rejects_unknown_codec() {
        let mut file = pcm16_file(8000, 1, &[0]);
        // Codec tag lives at offset 20 (after RIFF header and fmt preamble).
        file[20..22].copy_from_slice(&7u16.to_le_bytes()); // mu-law
        assert!(matches!(
            read_wav(&file),
            Err(DspError::UnsupportedCodec(7))
        ));
    }

    #[test]
    fn rejects_unsupported_bit_depth() {
        let mut file = pcm16_file(8000, 1, &[0]);
        file[34..36].copy_from_slice(&8u16.to_le_bytes());
        assert!(matches!(
            read_wav(&file),
            Err(DspError::UnsupportedBitDepth(8))
        ));
    }

    #[test]
    fn reads_float32_payload() {
        let mut out = Vec::new();
        let values = [0.25f32, -0.75, 1.5, f32::NAN];
        let data_size = (values.len() * 4) as u32;
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_size).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&3u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&22050u32.to_le_bytes());
        out.extend_from_slice(&(22050u32 * 4).to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&32u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_size.to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let audio = read_wav(&out).unwrap();
        // Floats are read verbatim (no clipping on read); NaN is sanitized.
        assert_eq!(audio.samples, vec![0.25, -0.75, 1.5, 0.0]);
    }

    #[test]
    fn write_clips_and_rounds_half_away_from_zero() {
        let audio = AudioBuffer::new(vec![2.0, -2.0, 0.5, 1.5 / 32768.0, -1.5 / 32768.0], 8000);
        let bytes = write_wav(&audio);
        let back = read_wav(&bytes).unwrap();
        assert_eq!(back.samples[0], 32767.0 / 32768.0); // +full scale clips to i16::MAX
        assert_eq!(back.samples[1], -1.0);
        assert_eq!(back.samples[2], 0.5);
        assert_eq!(back.samples[3], 2.0 / 32768.0); // 1.5 rounds away from zero
        assert_eq!(back.samples[4], -2.0 / 32768.0);
    }

    #[test]
    fn truncated_data_chunk_errors() {
        let mut file = pcm16_file(8000, 1, &[1, 2, 3, 4]);
        file.truncate(file.len() - 3);
        assert!(matches!(read_wav(&file), Err(DspError::Truncated)));
    }

    #[test]
    fn zero_length_audio_round_trips() {
        let audio = AudioBuffer::new(vec![], 24000);
        let back = read_wav(&write_wav(&audio)).unwrap();
        assert_eq!(back.samples.len(), 0);
        assert_eq!(back.sample_rate_hz, 24000);
    }

    proptest::proptest! {
        /// Quantization error of a write/read round trip never exceeds half a
        /// quantization step, except right at positive full scale where the
        /// clamp to 32767 costs up to one full step.
        #[test]
        fn round_trip_error_within_half_step(
            samples in proptest::collection::vec(-1.0f64..1.0, 0..200)
        ) {
            let audio = AudioBuffer::new(samples.clone(), 16000);
            let back = read_wav(&write_wav(&audio)).unwrap();
            for (a, b) in samples.iter().zip(back.samples.iter()) {
                let bound =
                    if *a > 32766.5 / 32768.0 { 1.0 / 32768.0 } else { 0.5 / 32768.0 };
                proptest::prop_assert!((a - b).abs() <= bound + 1e-12);
            }
        }

        /// Data already on the 1/32768 grid survives exactly.
        #[test]
        fn grid_data_is_lossless(raw in proptest::collection::vec(-32768i32..32768, 0..200)) {
            let samples: Vec<f64> = raw.iter().map(|&s| s as f64 / 32768.0).collect();
            let audio = AudioBuffer::new(samples.clone(), 16000);
            let back = read_wav(&write_wav(&audio)).unwrap();
            proptest::prop_assert_eq!(samples, back.samples);
        }
    }
}
