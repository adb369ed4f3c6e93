//! Acoustic front-end: audio I/O, log-mel extraction, normalization and
//! approximate mel inversion for audio previews.

mod audio;
mod cache;
mod invert;
mod mel;
mod stft;

pub use audio::{load_audio, resample, save_audio, AudioClip};
pub use cache::{read_feature_file, write_feature_file};
pub use invert::invert_mel_preview;
pub use mel::{compute_log_mel, mel_filterbank, mel_point_frequencies};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};

/// Analysis window shape. Only Hann is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

/// Front-end configuration: 24 kHz audio, 50 ms Hann window, 12.5 ms hop,
/// 80 mel bins, natural-log compression floored at 1e-10.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub win_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    #[serde(default)]
    pub window: Window,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 24_000,
            win_ms: 50.0,
            hop_ms: 12.5,
            n_mels: 80,
            window: Window::Hann,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Feature("sample_rate must be positive".into()));
        }
        if self.win_ms < self.hop_ms {
            return Err(Error::Feature(format!(
                "win_ms {} must be >= hop_ms {}",
                self.win_ms, self.hop_ms
            )));
        }
        let hop = self.sample_rate as f64 * self.hop_ms / 1000.0;
        if (hop - hop.round()).abs() > 1e-9 || hop < 1.0 {
            return Err(Error::Feature(format!(
                "hop of {hop} samples is not a positive integer"
            )));
        }
        let win = self.sample_rate as f64 * self.win_ms / 1000.0;
        if (win - win.round()).abs() > 1e-9 || win < 1.0 {
            return Err(Error::Feature(format!(
                "window of {win} samples is not a positive integer"
            )));
        }
        if self.n_mels == 0 {
            return Err(Error::Feature("n_mels must be positive".into()));
        }
        if !self.log_floor.is_finite() || self.log_floor <= 0.0 {
            return Err(Error::Feature("log_floor must be positive".into()));
        }
        Ok(())
    }

    pub fn hop_samples(&self) -> usize {
        (self.sample_rate as f64 * self.hop_ms / 1000.0).round() as usize
    }

    pub fn win_samples(&self) -> usize {
        (self.sample_rate as f64 * self.win_ms / 1000.0).round() as usize
    }

    /// FFT size: smallest power of two >= window length (2048 at defaults).
    pub fn n_fft(&self) -> usize {
        self.win_samples().next_power_of_two()
    }

    pub fn n_freq_bins(&self) -> usize {
        self.n_fft() / 2 + 1
    }

    /// Analysis frames per second of audio (80 at defaults).
    pub fn frames_per_second(&self) -> f64 {
        self.sample_rate as f64 / self.hop_samples() as f64
    }

    /// Frame count for `num_samples` samples: 1 + floor(N / hop).
    pub fn num_frames(&self, num_samples: usize) -> usize {
        1 + num_samples / self.hop_samples()
    }
}

/// Log-mel spectrogram: `num_frames x n_mels` matrix of log energies.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMelSpectrogram {
    frames: Tensor,
    config: FeatureConfig,
}

impl LogMelSpectrogram {
    pub fn new(frames: Tensor, config: FeatureConfig) -> Result<Self> {
        if frames.shape().len() != 2 || frames.cols() != config.n_mels {
            return Err(Error::Feature(format!(
                "frame matrix {:?} does not match n_mels {}",
                frames.shape(),
                config.n_mels
            )));
        }
        frames.ensure_finite("spectrogram")?;
        Ok(LogMelSpectrogram { frames, config })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_mels(&self) -> usize {
        self.frames.cols()
    }

    pub fn frames(&self) -> &Tensor {
        &self.frames
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn into_frames(self) -> Tensor {
        self.frames
    }
}

/// Per-bin mean/stddev used to normalize features before training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Identity stats: mean 0, stddev 1 per bin.
    pub fn identity(n_mels: usize) -> Self {
        FeatureStats {
            mean: vec![0.0; n_mels],
            std: vec![1.0; n_mels],
        }
    }

    /// Global per-bin statistics over a corpus of spectrograms. A variance
    /// floor keeps constant bins (pure silence) invertible.
    pub fn from_spectrograms<'a>(specs: impl IntoIterator<Item = &'a LogMelSpectrogram>) -> Result<Self> {
        let mut n_mels = 0usize;
        let mut count = 0u64;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for spec in specs {
            if n_mels == 0 {
                n_mels = spec.n_mels();
                sum = vec![0.0; n_mels];
                sum_sq = vec![0.0; n_mels];
            } else if spec.n_mels() != n_mels {
                return Err(Error::Feature("mixed n_mels in stats corpus".into()));
            }
            for i in 0..spec.num_frames() {
                for (j, &v) in spec.frames.row(i).iter().enumerate() {
                    sum[j] += v;
                    sum_sq[j] += v * v;
                }
            }
            count += spec.num_frames() as u64;
        }
        if count == 0 {
            return Err(Error::Feature("no frames to compute stats from".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std: Vec<f64> = sum_sq
            .iter()
            .zip(mean.iter())
            .map(|(sq, m)| ((sq / n - m * m).max(0.0) + 1e-8).sqrt())
            .collect();
        Ok(FeatureStats { mean, std })
    }

    pub fn validate(&self, n_mels: usize) -> Result<()> {
        if self.mean.len() != n_mels || self.std.len() != n_mels {
            return Err(Error::Feature(format!(
                "stats have {}/{} entries, expected {}",
                self.mean.len(),
                self.std.len(),
                n_mels
            )));
        }
        if self.std.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::Feature("stddev must be positive per bin".into()));
        }
        Ok(())
    }
}

/// (x - mean) / std per bin. Inverse of [`denormalize_features`].
pub fn normalize_features(spec: &LogMelSpectrogram, stats: &FeatureStats) -> Result<LogMelSpectrogram> {
    stats.validate(spec.n_mels())?;
    let mut frames = spec.frames.clone();
    let cols = frames.cols();
    for row in 0..frames.rows() {
        let r = frames.row_mut(row);
        for j in 0..cols {
            r[j] = (r[j] - stats.mean[j]) / stats.std[j];
        }
    }
    LogMelSpectrogram::new(frames, spec.config.clone())
}

/// x * std + mean per bin. Inverse of [`normalize_features`].
pub fn denormalize_features(spec: &LogMelSpectrogram, stats: &FeatureStats) -> Result<LogMelSpectrogram> {
    stats.validate(spec.n_mels())?;
    let mut frames = spec.frames.clone();
    let cols = frames.cols();
    for row in 0..frames.rows() {
        let r = frames.row_mut(row);
        for j in 0..cols {
            r[j] = r[j] * stats.std[j] + stats.mean[j];
        }
    }
    LogMelSpectrogram::new(frames, spec.config.clone())
}
