//! Mono WAV reading/writing and sample-rate conversion.

use crate::error::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Mono audio in [-1, 1] at a known sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Audio("samples contain NaN/Inf".into()));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Load a mono WAV file (16-bit PCM or 32-bit float) and resample it to
/// `target_sr`.
pub fn load_audio(path: impl AsRef<Path>, target_sr: u32) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::Audio(format!("cannot read {}: {e}", path.display())))?;
    if bytes.is_empty() {
        return Err(Error::Audio(format!("zero-length audio: {}", path.display())));
    }
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Audio(format!("corrupt WAV header: {}", path.display())));
    }

    let mut format: Option<(u16, u16, u32, u16)> = None; // (codec, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(&bytes, pos + 4) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Audio("truncated fmt chunk".into()));
                }
                format = Some((
                    read_u16(body, 0),
                    read_u16(body, 2),
                    read_u32(body, 4),
                    read_u16(body, 14),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = pos + 8 + size + (size & 1);
    }

    let (codec, channels, rate, bits) =
        format.ok_or_else(|| Error::Audio("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Audio("missing data chunk".into()))?;
    if channels != 1 {
        return Err(Error::Audio(format!(
            "expected mono audio, got {channels} channels: {}",
            path.display()
        )));
    }
    let samples: Vec<f64> = match (codec, bits) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        _ => {
            return Err(Error::Audio(format!(
                "unsupported WAV codec {codec}/{bits}-bit: {}",
                path.display()
            )))
        }
    };
    if samples.is_empty() {
        return Err(Error::Audio(format!("zero-length audio: {}", path.display())));
    }
    let clip = AudioClip::new(samples, rate)?;
    resample(&clip, target_sr)
}

/// Write a clip as 16-bit PCM mono WAV.
pub fn save_audio(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Windowed-sinc resampler. Identity rates return the clip unchanged so the
/// no-op case is bit-exact.
pub fn resample(clip: &AudioClip, target_sr: u32) -> Result<AudioClip> {
    if target_sr == 0 {
        return Err(Error::Audio("target sample rate must be positive".into()));
    }
    if clip.sample_rate == target_sr {
        return Ok(clip.clone());
    }
    let n = clip.samples.len();
    let out_len = ((n as u64 * target_sr as u64 + clip.sample_rate as u64 / 2)
        / clip.sample_rate as u64) as usize;
    let ratio = clip.sample_rate as f64 / target_sr as f64;
    // Low-pass at the narrower of the two Nyquists when decimating.
    let cutoff = (target_sr as f64 / clip.sample_rate as f64).min(1.0);
    let half_taps = 32usize;
    let width = half_taps as f64;
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let t = j as f64 * ratio;
        let center = t.floor() as isize;
        let mut acc = 0.0;
        for i in (center - half_taps as isize + 1)..=(center + half_taps as isize) {
            if i < 0 || i >= n as isize {
                continue;
            }
            let d = t - i as f64;
            let w = 0.5 + 0.5 * (std::f64::consts::PI * d / width).cos();
            acc += clip.samples[i as usize] * cutoff * sinc(cutoff * d) * w;
        }
        out.push(acc.clamp(-1.0, 1.0));
    }
    AudioClip::new(out, target_sr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, seconds: f64, sr: u32) -> AudioClip {
        let n = (seconds * sr as f64).round() as usize;
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin() * 0.5)
            .collect();
        AudioClip::new(samples, sr).unwrap()
    }

    #[test]
    fn downsample_halves_length() {
        let clip = sine(440.0, 2.0, 48_000);
        let out = resample(&clip, 24_000).unwrap();
        assert_eq!(out.samples.len(), 48_000);
        assert_eq!(out.sample_rate, 24_000);
    }

    #[test]
    fn identity_resample_is_bit_exact() {
        let clip = sine(440.0, 0.5, 24_000);
        let out = resample(&clip, 24_000).unwrap();
        assert_eq!(out, clip);
    }

    #[test]
    fn resample_preserves_tone_frequency() {
        let clip = sine(1000.0, 1.0, 48_000);
        let out = resample(&clip, 24_000).unwrap();
        // Count zero crossings in the interior; a 1 kHz tone over 1 s has
        // ~2000 of them regardless of rate.
        let crossings = out.samples[100..out.samples.len() - 100]
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count();
        assert!((1900..2100).contains(&crossings), "crossings = {crossings}");
    }

    #[test]
    fn wav_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone.wav");
        let clip = sine(440.0, 0.2, 24_000);
        save_audio(&path, &clip).unwrap();
        let back = load_audio(&path, 24_000).unwrap();
        assert_eq!(back.sample_rate, 24_000);
        assert_eq!(back.samples.len(), clip.samples.len());
        let max_err = back
            .samples
            .iter()
            .zip(clip.samples.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1.0 / 32000.0, "16-bit quantization bound, got {max_err}");
    }

    #[test]
    fn load_audio_resamples_on_the_fly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone48.wav");
        save_audio(&path, &sine(440.0, 2.0, 48_000)).unwrap();
        let clip = load_audio(&path, 24_000).unwrap();
        assert_eq!(clip.sample_rate, 24_000);
        assert_eq!(clip.samples.len(), 48_000);
    }

    #[test]
    fn empty_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        fs::File::create(&path).unwrap();
        let err = load_audio(&path, 24_000).unwrap_err();
        assert!(err.to_string().contains("zero-length"));
    }

    #[test]
    fn garbage_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("garbage.wav");
        fs::write(&path, b"not a wav file at all").unwrap();
        assert!(load_audio(&path, 24_000).is_err());
    }
}
