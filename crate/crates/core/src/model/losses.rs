//! Reconstruction losses as plain value-level functions.
//!
//! The speech term is the sum of two mean-absolute errors — refined (coarse
//! plus Post-Net residual) and coarse against the target spectrogram, over
//! all frames. The text term is mean cross-entropy over the text-masked
//! positions only. The total is their unweighted sum. The training tape
//! computes identical quantities; these functions are the op-level contract
//! and what tests compare against independent oracles.

use super::net::ModelOutput;
use crate::error::{Error, Result};
use crate::linguistic::PhonemeSeq;
use crate::masking::MaskPlan;
use crate::nn::Tensor;

fn mean_abs(a: &Tensor, b: &Tensor, rows: Option<&[bool]>) -> f64 {
    let d = a.cols();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..a.rows() {
        if let Some(mask) = rows {
            if !mask[i] {
                continue;
            }
        }
        for (x, y) in a.row(i).iter().zip(b.row(i)) {
            total += (x - y).abs();
        }
        count += d;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// MAE(refined, target) + MAE(coarse, target), per-element means over all
/// frames.
pub fn speech_loss(out: &ModelOutput, target: &Tensor) -> Result<f64> {
    if out.refined_spec.shape() != target.shape() || out.coarse_spec.shape() != target.shape() {
        return Err(Error::Model(format!(
            "loss shapes differ: refined {:?}, coarse {:?}, target {:?}",
            out.refined_spec.shape(),
            out.coarse_spec.shape(),
            target.shape()
        )));
    }
    out.refined_spec.ensure_finite("refined spectrogram")?;
    out.coarse_spec.ensure_finite("coarse spectrogram")?;
    target.ensure_finite("target spectrogram")?;
    Ok(mean_abs(&out.refined_spec, target, None) + mean_abs(&out.coarse_spec, target, None))
}

/// Variant restricted to masked frames (behind the config flag; not the
/// default objective).
pub fn speech_loss_masked_only(
    out: &ModelOutput,
    target: &Tensor,
    frame_mask: &[bool],
) -> Result<f64> {
    if out.refined_spec.shape() != target.shape() || out.coarse_spec.shape() != target.shape() {
        return Err(Error::Model("loss shape mismatch".into()));
    }
    if frame_mask.len() != target.rows() {
        return Err(Error::Model("frame mask length mismatch".into()));
    }
    Ok(mean_abs(&out.refined_spec, target, Some(frame_mask))
        + mean_abs(&out.coarse_spec, target, Some(frame_mask)))
}

/// Mean cross-entropy over the plan's text-masked positions; 0 when the plan
/// masks no text.
pub fn text_loss(out: &ModelOutput, target: &PhonemeSeq, plan: &MaskPlan) -> Result<f64> {
    if plan.text_phonemes.is_empty() {
        return Ok(0.0);
    }
    let logits = &out.text_logits;
    if logits.rows() == 0 {
        return Err(Error::Model("empty logits".into()));
    }
    if logits.rows() != target.len() {
        return Err(Error::Model(format!(
            "logits cover {} positions but target has {}",
            logits.rows(),
            target.len()
        )));
    }
    let v = logits.cols();
    let mut total = 0.0;
    for &pos in &plan.text_phonemes {
        if pos >= target.len() {
            return Err(Error::Model(format!(
                "masked position {pos} outside sequence of {}",
                target.len()
            )));
        }
        let id = target.ids[pos];
        if id >= v {
            return Err(Error::Model(format!("target id {id} out of range {v}")));
        }
        let row = logits.row(pos);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = row.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
        total += log_z - row[id];
    }
    Ok(total / plan.text_phonemes.len() as f64)
}

/// Unweighted sum of the two terms.
pub fn total_loss(speech: f64, text: f64) -> Result<f64> {
    if !speech.is_finite() || !text.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite loss terms: speech {speech}, text {text}"
        )));
    }
    Ok(speech + text)
}
