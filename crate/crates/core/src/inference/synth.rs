//! The two downstream procedures plus masked-region reconstruction.
//!
//! All three share the same shape: assemble a masked joint input, run one
//! forward pass, and splice — model predictions (denormalized) fill the
//! masked frames, everything else is returned bit-identical to the input
//! features.

use super::duration::DurationModel;
use super::frames::durations_to_frames;
use super::requests::{CloneRequest, EditOp, EditRequest};
use crate::error::{Error, Result};
use crate::features::{invert_mel_preview, normalize_features, AudioClip, LogMelSpectrogram};
use crate::linguistic::{Alignment, PhonemeSeq};
use crate::masking::MaskPlan;
use crate::model::{Checkpoint, Mode, ModelInput};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};

/// What a synthesis call produced, for the JSON report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub output_frames: usize,
    pub masked_ranges: Vec<(usize, usize)>,
    /// Predicted durations (seconds) for the phonemes that got mask frames.
    pub durations: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    /// Output features in the raw (unnormalized) log-mel domain.
    pub features: LogMelSpectrogram,
    pub report: SynthesisReport,
}

impl SynthesisResult {
    /// Approximate waveform preview of the output features.
    pub fn preview(&self, iterations: usize) -> Result<AudioClip> {
        invert_mel_preview(&self.features, iterations)
    }
}

fn check_hash(request_hash: &str, ckpt: &Checkpoint) -> Result<()> {
    let have = ckpt.vocab.hash();
    if request_hash != have {
        return Err(Error::Inference(format!(
            "vocabulary hash mismatch: request {request_hash}, checkpoint {have}"
        )));
    }
    Ok(())
}

fn check_feature_config(spec: &LogMelSpectrogram, ckpt: &Checkpoint) -> Result<()> {
    if spec.config() != &ckpt.feature_config {
        return Err(Error::Inference(
            "input features use a different front-end config than the checkpoint".into(),
        ));
    }
    Ok(())
}

/// Run the model on an assembled input and splice its refined predictions
/// (denormalized) into the masked rows of `raw_rows`.
fn infill(
    ckpt: &Checkpoint,
    input: &ModelInput,
    raw_rows: &Tensor,
) -> Result<Tensor> {
    let output = ckpt.model.forward(input, Mode::Eval)?;
    let n_mels = raw_rows.cols();
    let mut out = raw_rows.clone();
    for (i, &masked) in input.frame_masked.iter().enumerate() {
        if !masked {
            continue;
        }
        let pred = output.refined_spec.row(i);
        let row = out.row_mut(i);
        for j in 0..n_mels {
            row[j] = pred[j] * ckpt.stats.std[j] + ckpt.stats.mean[j];
        }
    }
    Ok(out)
}

/// Prompt-based voice cloning: text is prompt ++ target, speech is the
/// prompt spectrogram followed by as many mask frames as the duration
/// predictor assigns to the target phonemes. One forward pass reconstructs
/// the masked region; the prompt region is returned bit-identical.
pub fn clone_voice(
    req: &CloneRequest,
    ckpt: &Checkpoint,
    dur: &DurationModel,
) -> Result<SynthesisResult> {
    req.validate()?;
    check_hash(&req.vocab_hash, ckpt)?;
    check_feature_config(&req.prompt_spec, ckpt)?;

    let durations = dur.predict_symbols(&req.target_symbols)?;
    let frames_per = durations_to_frames(&durations, &ckpt.feature_config)?;
    let mask_frames: usize = frames_per.iter().sum();

    let prompt_frames = req.prompt_spec.num_frames();
    let prompt_phonemes = req.prompt_seq.len();
    let total_frames = prompt_frames + mask_frames;

    let normalized = normalize_features(&req.prompt_spec, &ckpt.stats)?;
    let n_mels = ckpt.feature_config.n_mels;
    let mut frames = Tensor::zeros(&[total_frames, n_mels]);
    for i in 0..prompt_frames {
        frames.row_mut(i).copy_from_slice(normalized.frames().row(i));
    }

    let mut frame_masked = vec![false; prompt_frames];
    frame_masked.extend(std::iter::repeat_n(true, mask_frames));

    let mut frame_phoneme = req.prompt_alignment.frame_phonemes();
    for (k, &n) in frames_per.iter().enumerate() {
        frame_phoneme.extend(std::iter::repeat_n(prompt_phonemes + k, n));
    }

    let mut text_ids = req.prompt_seq.ids.clone();
    text_ids.extend_from_slice(&req.target_seq.ids);

    let input = ModelInput::for_inference(frames, frame_masked, frame_phoneme, text_ids);

    // Raw-domain scaffold: prompt rows verbatim, masked rows to be filled.
    let mut raw = Tensor::zeros(&[total_frames, n_mels]);
    for i in 0..prompt_frames {
        raw.row_mut(i).copy_from_slice(req.prompt_spec.frames().row(i));
    }
    let out = infill(ckpt, &input, &raw)?;
    Ok(SynthesisResult {
        features: LogMelSpectrogram::new(out, ckpt.feature_config.clone())?,
        report: SynthesisReport {
            output_frames: total_frames,
            masked_ranges: vec![(prompt_frames, total_frames)],
            durations,
        },
    })
}

/// Mask-insert speech editing. The aligned frame region of the edited span
/// is excised; for insert/replace, mask frames sized by the duration
/// predictor take its place and one forward pass fills them. Delete splices
/// without regeneration unless `boundary_smooth_frames` asks for masked
/// context on each side.
pub fn edit_speech(
    req: &EditRequest,
    ckpt: &Checkpoint,
    dur: &DurationModel,
) -> Result<SynthesisResult> {
    req.validate()?;
    check_hash(&req.vocab_hash, ckpt)?;
    check_feature_config(&req.spec, ckpt)?;

    let (i, j) = req.span;
    let num_frames = req.spec.num_frames();
    let p = req.seq.len();

    // Frame region being removed; empty for insert.
    let region_start = if i < p {
        req.alignment.span(i).0
    } else {
        num_frames
    };
    let region_end = if req.op == EditOp::Insert {
        region_start
    } else {
        req.alignment.span(j - 1).1
    };

    let (durations, frames_per) = if req.new_seq.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let durations = dur.predict_symbols(&req.new_symbols)?;
        let frames_per = durations_to_frames(&durations, &ckpt.feature_config)?;
        (durations, frames_per)
    };
    let inserted: usize = frames_per.iter().sum();

    let prefix = region_start;
    let suffix = num_frames - region_end;
    let total = prefix + inserted + suffix;

    // Boundary smoothing: mask k context frames each side of the edit.
    let k = req.boundary_smooth_frames;
    let left_smooth = k.min(prefix);
    let right_smooth = k.min(suffix);

    let mut frame_masked = vec![false; total];
    for f in frame_masked
        .iter_mut()
        .take(prefix + inserted + right_smooth)
        .skip(prefix - left_smooth)
    {
        *f = true;
    }

    // Output phoneme sequence and the frame -> phoneme map.
    let mut text_ids: Vec<usize> = req.seq.ids[..i].to_vec();
    text_ids.extend_from_slice(&req.new_seq.ids);
    text_ids.extend_from_slice(&req.seq.ids[j..]);

    let mut frame_phoneme = Vec::with_capacity(total);
    for ph in 0..i {
        let (s, e) = req.alignment.span(ph);
        frame_phoneme.extend(std::iter::repeat_n(ph, e - s));
    }
    for (kk, &n) in frames_per.iter().enumerate() {
        frame_phoneme.extend(std::iter::repeat_n(i + kk, n));
    }
    let shift = req.new_seq.len();
    for ph in j..p {
        let (s, e) = req.alignment.span(ph);
        frame_phoneme.extend(std::iter::repeat_n(i + shift + (ph - j), e - s));
    }
    debug_assert_eq!(frame_phoneme.len(), total);

    // Raw-domain scaffold: prefix and shifted suffix verbatim.
    let n_mels = ckpt.feature_config.n_mels;
    let mut raw = Tensor::zeros(&[total, n_mels]);
    for t in 0..prefix {
        raw.row_mut(t).copy_from_slice(req.spec.frames().row(t));
    }
    for t in 0..suffix {
        raw.row_mut(prefix + inserted + t)
            .copy_from_slice(req.spec.frames().row(region_end + t));
    }

    let masked_ranges = if frame_masked.iter().any(|&m| m) {
        vec![(prefix - left_smooth, prefix + inserted + right_smooth)]
    } else {
        Vec::new()
    };

    let out = if masked_ranges.is_empty() {
        raw
    } else {
        // Normalized scaffold with masked rows zeroed.
        let raw_spec = LogMelSpectrogram::new(raw.clone(), ckpt.feature_config.clone())?;
        let normalized = normalize_features(&raw_spec, &ckpt.stats)?;
        let mut frames = normalized.into_frames();
        for (t, &m) in frame_masked.iter().enumerate() {
            if m {
                for v in frames.row_mut(t) {
                    *v = 0.0;
                }
            }
        }
        let input = ModelInput::for_inference(frames, frame_masked, frame_phoneme, text_ids);
        infill(ckpt, &input, &raw)?
    };

    Ok(SynthesisResult {
        features: LogMelSpectrogram::new(out, ckpt.feature_config.clone())?,
        report: SynthesisReport {
            output_frames: total,
            masked_ranges,
            durations,
        },
    })
}

/// Reconstruct the frames a mask plan hides: output equals the input outside
/// the plan and the model's refined prediction inside it.
pub fn reconstruct_masked(
    spec: &LogMelSpectrogram,
    text: &PhonemeSeq,
    alignment: &Alignment,
    plan: &MaskPlan,
    ckpt: &Checkpoint,
) -> Result<LogMelSpectrogram> {
    check_feature_config(spec, ckpt)?;
    if alignment.num_frames() != spec.num_frames() || alignment.num_phonemes() != text.len() {
        return Err(Error::Inference("alignment does not match the utterance".into()));
    }
    if plan.speech_frame_ranges.is_empty() && plan.text_phonemes.is_empty() {
        return Ok(spec.clone());
    }
    let normalized = normalize_features(spec, &ckpt.stats)?;
    let pair = crate::masking::apply_masks(&normalized, text, plan, &ckpt.vocab)?;
    let input = ModelInput::from_masked_pair(&pair, alignment)?;
    let out = infill(ckpt, &input, spec.frames())?;
    LogMelSpectrogram::new(out, ckpt.feature_config.clone())
}
