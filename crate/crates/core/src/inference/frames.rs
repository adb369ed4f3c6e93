//! Duration-to-frame arithmetic: each phoneme gets
//! max(1, round(d * sample_rate / hop)) frames.
//!
//! Rounding happens per phoneme (not on the summed duration) because the
//! alignment embeddings need a concrete frame count for every phoneme; the
//! 1-frame minimum keeps every phoneme representable.

use crate::error::{Error, Result};
use crate::features::FeatureConfig;

pub fn durations_to_frames(durations: &[f64], cfg: &FeatureConfig) -> Result<Vec<usize>> {
    let per_second = cfg.frames_per_second();
    durations
        .iter()
        .map(|&d| {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::Inference(format!("non-positive duration {d}")));
            }
            Ok(((d * per_second).round() as usize).max(1))
        })
        .collect()
}

pub fn total_frames(durations: &[f64], cfg: &FeatureConfig) -> Result<usize> {
    Ok(durations_to_frames(durations, cfg)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighty_frames_per_second_at_defaults() {
        let cfg = FeatureConfig::default();
        let frames = durations_to_frames(&[0.1, 0.15], &cfg).unwrap();
        assert_eq!(frames, vec![8, 12]);
        assert_eq!(total_frames(&[0.1, 0.15], &cfg).unwrap(), 20);
    }

    #[test]
    fn tiny_duration_clamps_to_one_frame() {
        let cfg = FeatureConfig::default();
        assert_eq!(durations_to_frames(&[0.001], &cfg).unwrap(), vec![1]);
    }

    #[test]
    fn empty_input_sums_to_zero() {
        let cfg = FeatureConfig::default();
        assert_eq!(total_frames(&[], &cfg).unwrap(), 0);
    }

    #[test]
    fn non_positive_durations_are_rejected() {
        let cfg = FeatureConfig::default();
        assert!(durations_to_frames(&[0.0], &cfg).is_err());
        assert!(durations_to_frames(&[-0.5], &cfg).is_err());
        assert!(durations_to_frames(&[f64::NAN], &cfg).is_err());
    }
}
