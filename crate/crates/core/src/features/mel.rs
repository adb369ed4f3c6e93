//! Log-mel extraction: Hann-windowed STFT, Slaney-scale filterbank spanning
//! 0 Hz to Nyquist, natural-log compression with a floor.

use super::stft::StftPlan;
use super::{AudioClip, FeatureConfig, LogMelSpectrogram};
use crate::error::{Error, Result};
use crate::nn::Tensor;

const MEL_BREAK_HZ: f64 = 1000.0;
const MEL_LINEAR_STEP: f64 = 200.0 / 3.0;

fn hz_to_mel(hz: f64) -> f64 {
    let log_step = (6.4f64).ln() / 27.0;
    if hz < MEL_BREAK_HZ {
        hz / MEL_LINEAR_STEP
    } else {
        MEL_BREAK_HZ / MEL_LINEAR_STEP + (hz / MEL_BREAK_HZ).ln() / log_step
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    let log_step = (6.4f64).ln() / 27.0;
    let break_mel = MEL_BREAK_HZ / MEL_LINEAR_STEP;
    if mel < break_mel {
        mel * MEL_LINEAR_STEP
    } else {
        MEL_BREAK_HZ * ((mel - break_mel) * log_step).exp()
    }
}

/// The n_mels + 2 band edge/center frequencies in Hz. Filter m is the
/// triangle over points (m, m+1, m+2), so centers are points 1..=n_mels.
pub fn mel_point_frequencies(cfg: &FeatureConfig) -> Vec<f64> {
    let nyquist = cfg.sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (cfg.n_mels + 1) as f64))
        .collect()
}

/// Triangular, area-normalized filterbank: `n_mels x n_freq_bins`.
pub fn mel_filterbank(cfg: &FeatureConfig) -> Tensor {
    let n_bins = cfg.n_freq_bins();
    let points = mel_point_frequencies(cfg);
    let bin_hz = cfg.sample_rate as f64 / cfg.n_fft() as f64;
    let mut fb = vec![0.0; cfg.n_mels * n_bins];
    for m in 0..cfg.n_mels {
        let (lo, mid, hi) = (points[m], points[m + 1], points[m + 2]);
        let norm = 2.0 / (hi - lo);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let rising = if mid > lo { (f - lo) / (mid - lo) } else { 0.0 };
            let falling = if hi > mid { (hi - f) / (hi - mid) } else { 0.0 };
            let w = rising.min(falling).max(0.0);
            fb[m * n_bins + k] = w * norm;
        }
    }
    Tensor::from_vec(&[cfg.n_mels, n_bins], fb)
}

/// Power spectrogram -> mel energies -> ln(max(e, floor)).
pub fn compute_log_mel(clip: &AudioClip, cfg: &FeatureConfig) -> Result<LogMelSpectrogram> {
    cfg.validate()?;
    if clip.sample_rate != cfg.sample_rate {
        return Err(Error::Feature(format!(
            "clip rate {} does not match config rate {}",
            clip.sample_rate, cfg.sample_rate
        )));
    }
    if clip.samples.is_empty() {
        return Err(Error::Feature("empty clip".into()));
    }
    let plan = StftPlan::new(cfg);
    let fb = mel_filterbank(cfg);
    let n_bins = plan.n_bins;
    let num_frames = plan.num_frames(clip.samples.len());
    let mut out = vec![0.0; num_frames * cfg.n_mels];
    let mut power = vec![0.0; n_bins];
    for t in 0..num_frames {
        let spec = plan.frame_spectrum(&clip.samples, t);
        for (p, c) in power.iter_mut().zip(spec.iter()) {
            *p = c.norm_sqr();
        }
        for m in 0..cfg.n_mels {
            let weights = &fb.data()[m * n_bins..(m + 1) * n_bins];
            let mut acc = 0.0;
            for (w, p) in weights.iter().zip(power.iter()) {
                acc += w * p;
            }
            out[t * cfg.n_mels + m] = acc.max(cfg.log_floor).ln();
        }
    }
    LogMelSpectrogram::new(Tensor::from_vec(&[num_frames, cfg.n_mels], out), cfg.clone())
}
