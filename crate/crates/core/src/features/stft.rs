//! Centered STFT/ISTFT shared by the mel front-end and the preview inverter.

use super::FeatureConfig;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Symmetric reflection without edge duplication, defined for any overhang.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Periodic Hann window.
pub(crate) fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
        .collect()
}

pub(crate) struct StftPlan {
    pub win: Vec<f64>,
    pub win_samples: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub n_bins: usize,
    /// Windowed frame sits centered inside the zero-padded FFT buffer.
    pub pad_offset: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(cfg: &FeatureConfig) -> Self {
        let win_samples = cfg.win_samples();
        let n_fft = cfg.n_fft();
        let mut planner = FftPlanner::new();
        StftPlan {
            win: hann_window(win_samples),
            win_samples,
            hop: cfg.hop_samples(),
            n_fft,
            n_bins: n_fft / 2 + 1,
            pad_offset: (n_fft - win_samples) / 2,
            fft: planner.plan_fft_forward(n_fft),
            ifft: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn num_frames(&self, num_samples: usize) -> usize {
        1 + num_samples / self.hop
    }

    /// Half-spectrum of the frame centered at `frame * hop`, with reflect
    /// padding at the signal edges.
    pub fn frame_spectrum(&self, samples: &[f64], frame: usize) -> Vec<Complex<f64>> {
        let center = (frame * self.hop) as isize;
        let half = (self.win_samples / 2) as isize;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        for (j, w) in self.win.iter().enumerate() {
            let idx = reflect_index(center - half + j as isize, samples.len());
            buf[self.pad_offset + j] = Complex::new(samples[idx] * w, 0.0);
        }
        self.fft.process(&mut buf);
        buf.truncate(self.n_bins);
        buf
    }

    pub fn stft(&self, samples: &[f64]) -> Vec<Vec<Complex<f64>>> {
        (0..self.num_frames(samples.len()))
            .map(|t| self.frame_spectrum(samples, t))
            .collect()
    }

    /// Weighted overlap-add inverse of half-spectrum frames.
    pub fn istft(&self, frames: &[Vec<Complex<f64>>], out_len: usize) -> Vec<f64> {
        let mut num = vec![0.0f64; out_len];
        let mut den = vec![0.0f64; out_len];
        let half = (self.win_samples / 2) as isize;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        for (f, spec) in frames.iter().enumerate() {
            // Rebuild the full spectrum from the Hermitian half.
            for (k, v) in spec.iter().enumerate() {
                buf[k] = *v;
            }
            for k in self.n_bins..self.n_fft {
                buf[k] = spec[self.n_fft - k].conj();
            }
            self.ifft.process(&mut buf);
            let scale = 1.0 / self.n_fft as f64;
            let start = f as isize * self.hop as isize - half;
            for (j, w) in self.win.iter().enumerate() {
                let t = start + j as isize;
                if t < 0 || t >= out_len as isize {
                    continue;
                }
                let sample = buf[self.pad_offset + j].re * scale;
                num[t as usize] += w * sample;
                den[t as usize] += w * w;
            }
        }
        num.iter()
            .zip(den.iter())
            .map(|(n, d)| if *d > 1e-12 { n / d } else { 0.0 })
            .collect()
    }
}
