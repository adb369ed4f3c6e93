//! Noam learning-rate schedule.

use crate::error::{Error, Result};

/// lr = scale * d_model^(-0.5) * min(step^(-0.5), step * warmup^(-1.5)).
///
/// The "initial learning rate" from transformer recipes is the `scale`
/// factor here, not a literal starting rate.
pub fn noam_lr(step: usize, d_model: usize, warmup: usize, scale: f64) -> Result<f64> {
    if step == 0 {
        return Err(Error::Training("noam_lr is undefined at step 0".into()));
    }
    if warmup == 0 {
        return Err(Error::Training("warmup must be >= 1".into()));
    }
    let s = step as f64;
    let w = warmup as f64;
    Ok(scale * (d_model as f64).powf(-0.5) * (s.powf(-0.5)).min(s * w.powf(-1.5)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_value_at_the_warmup_peak() {
        let lr = noam_lr(4000, 256, 4000, 1.0).unwrap();
        assert!((lr - 9.8821e-4).abs() < 1e-7, "lr = {lr}");
    }

    #[test]
    fn first_step_takes_the_warmup_branch() {
        let lr = noam_lr(1, 64, 100, 2.0).unwrap();
        let expected = 2.0 * (64f64).powf(-0.5) * (100f64).powf(-1.5);
        assert!((lr - expected).abs() < 1e-15);
    }

    #[test]
    fn monotone_up_then_down_around_warmup() {
        let warmup = 500;
        let mut prev = 0.0;
        for step in 1..=warmup {
            let lr = noam_lr(step, 128, warmup, 1.0).unwrap();
            assert!(lr > prev, "should increase at step {step}");
            prev = lr;
        }
        for step in warmup + 1..=2 * warmup {
            let lr = noam_lr(step, 128, warmup, 1.0).unwrap();
            assert!(lr < prev, "should decrease at step {step}");
            prev = lr;
        }
    }

    #[test]
    fn step_zero_is_an_error() {
        assert!(noam_lr(0, 256, 4000, 1.0).is_err());
    }
}
