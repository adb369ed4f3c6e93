//! Approximate waveform previews: mel pseudo-inverse to linear magnitude,
//! then iterative phase reconstruction. Fidelity is explicitly a non-goal;
//! this stands in for a neural vocoder.

use super::mel::mel_filterbank;
use super::stft::StftPlan;
use super::{AudioClip, LogMelSpectrogram};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use rustfft::num_complex::Complex;

/// Gauss-Jordan inverse with partial pivoting. The Gram matrix of the mel
/// filterbank is small (n_mels^2) and well conditioned.
fn invert_matrix(m: &Tensor) -> Result<Tensor> {
    let n = m.rows();
    assert_eq!(n, m.cols(), "invert_matrix needs a square input");
    let mut a = m.clone();
    let mut inv = Tensor::zeros(&[n, n]);
    for i in 0..n {
        inv.set(i, i, 1.0);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a.at(x, col).abs().partial_cmp(&a.at(y, col).abs()).unwrap())
            .unwrap();
        if a.at(pivot, col).abs() < 1e-12 {
            return Err(Error::Numerical("singular mel Gram matrix".into()));
        }
        if pivot != col {
            for j in 0..n {
                let (x, y) = (a.at(col, j), a.at(pivot, j));
                a.set(col, j, y);
                a.set(pivot, j, x);
                let (x, y) = (inv.at(col, j), inv.at(pivot, j));
                inv.set(col, j, y);
                inv.set(pivot, j, x);
            }
        }
        let d = a.at(col, col);
        for j in 0..n {
            a.set(col, j, a.at(col, j) / d);
            inv.set(col, j, inv.at(col, j) / d);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a.at(row, col);
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a.set(row, j, a.at(row, j) - f * a.at(col, j));
                inv.set(row, j, inv.at(row, j) - f * inv.at(col, j));
            }
        }
    }
    Ok(inv)
}

/// Moore-Penrose pseudo-inverse of the (full row rank) filterbank:
/// M^+ = M^T (M M^T)^-1, shape `n_freq_bins x n_mels`.
fn filterbank_pinv(fb: &Tensor) -> Result<Tensor> {
    let gram = fb.matmul_bt(fb);
    let gram_inv = invert_matrix(&gram)?;
    Ok(fb.transpose().matmul(&gram_inv))
}

/// Invert a log-mel spectrogram to an audio preview.
///
/// Mel energies are mapped to a nonnegative linear power spectrum via the
/// filterbank pseudo-inverse, and phase is recovered by `iterations` rounds
/// of ISTFT/STFT projection starting from zero phase (deterministic).
pub fn invert_mel_preview(spec: &LogMelSpectrogram, iterations: usize) -> Result<AudioClip> {
    if iterations == 0 {
        return Err(Error::Feature("iterations must be >= 1".into()));
    }
    spec.frames().ensure_finite("spectrogram")?;
    let cfg = spec.config().clone();
    let plan = StftPlan::new(&cfg);
    let fb = mel_filterbank(&cfg);
    let pinv = filterbank_pinv(&fb)?;
    let n_bins = plan.n_bins;
    let num_frames = spec.num_frames();

    // Target magnitudes per frame.
    let mut mags = vec![vec![0.0f64; n_bins]; num_frames];
    for t in 0..num_frames {
        let mel_energy: Vec<f64> = spec.frames().row(t).iter().map(|&v| v.exp()).collect();
        for k in 0..n_bins {
            let row = pinv.row(k);
            let mut acc = 0.0;
            for (w, e) in row.iter().zip(mel_energy.iter()) {
                acc += w * e;
            }
            mags[t][k] = acc.max(0.0).sqrt();
        }
    }

    let out_len = (num_frames.saturating_sub(1)) * plan.hop;
    if out_len == 0 {
        return AudioClip::new(vec![0.0; plan.hop], cfg.sample_rate);
    }

    let mut phases = vec![vec![0.0f64; n_bins]; num_frames];
    let mut wave = Vec::new();
    for _ in 0..iterations {
        let frames: Vec<Vec<Complex<f64>>> = mags
            .iter()
            .zip(phases.iter())
            .map(|(mag, ph)| {
                mag.iter()
                    .zip(ph.iter())
                    .map(|(&m, &p)| Complex::from_polar(m, p))
                    .collect()
            })
            .collect();
        wave = plan.istft(&frames, out_len);
        let reproj = plan.stft(&wave);
        for (t, frame) in reproj.iter().enumerate().take(num_frames) {
            for (k, c) in frame.iter().enumerate() {
                phases[t][k] = c.arg();
            }
        }
    }
    for v in wave.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    AudioClip::new(wave, cfg.sample_rate)
}
