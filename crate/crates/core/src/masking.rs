//! Non-overlapping speech-span / text-phoneme mask plans.
//!
//! Span selection happens on phoneme indices and expands to frames through
//! the alignment, which is what guarantees the non-overlap between the two
//! modalities: a phoneme is either speech-masked (its frames hidden), text-
//! masked (its token hidden), or untouched — never both.

use crate::error::{Error, Result};
use crate::features::LogMelSpectrogram;
use crate::linguistic::{Alignment, PhonemeSeq, PhonemeVocab};
use crate::nn::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Mask-generation knobs. `lambda` is the fraction of phonemes whose frames
/// are speech-masked; half of the remainder is text-masked when `mask_text`
/// is on.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MaskSettings {
    pub lambda: f64,
    pub mean_span: usize,
    pub mask_text: bool,
}

impl Default for MaskSettings {
    fn default() -> Self {
        MaskSettings {
            lambda: 0.8,
            mean_span: 3,
            mask_text: true,
        }
    }
}

/// A resolved mask assignment for one utterance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub lambda: f64,
    pub seed: u64,
    pub speech_phonemes: BTreeSet<usize>,
    pub text_phonemes: BTreeSet<usize>,
    /// Coalesced frame intervals covering exactly the aligned spans of
    /// `speech_phonemes`.
    pub speech_frame_ranges: Vec<(usize, usize)>,
}

impl MaskPlan {
    /// A plan that masks nothing.
    pub fn empty() -> Self {
        MaskPlan {
            lambda: 0.0,
            seed: 0,
            speech_phonemes: BTreeSet::new(),
            text_phonemes: BTreeSet::new(),
            speech_frame_ranges: Vec::new(),
        }
    }

    pub fn masked_frame_count(&self) -> usize {
        self.speech_frame_ranges.iter().map(|(s, e)| e - s).sum()
    }

    pub fn frame_is_masked(&self, frame: usize) -> bool {
        self.speech_frame_ranges
            .iter()
            .any(|&(s, e)| frame >= s && frame < e)
    }

    /// Boolean mask per frame.
    pub fn frame_mask(&self, num_frames: usize) -> Vec<bool> {
        let mut mask = vec![false; num_frames];
        for &(s, e) in &self.speech_frame_ranges {
            for m in mask.iter_mut().take(e).skip(s) {
                *m = true;
            }
        }
        mask
    }
}

/// round-half-up of lambda * num_phonemes.
pub fn speech_mask_count(num_phonemes: usize, lambda: f64) -> usize {
    (lambda * num_phonemes as f64 + 0.5).floor() as usize
}

/// floor((P - speech_count) / 2).
pub fn text_mask_count(num_phonemes: usize, speech_count: usize) -> usize {
    (num_phonemes - speech_count) / 2
}

/// Generate a mask plan with the default settings (text masking on).
pub fn plan_masks(
    alignment: &Alignment,
    lambda: f64,
    mean_span: usize,
    seed: u64,
) -> Result<MaskPlan> {
    plan_masks_with(
        alignment,
        &MaskSettings {
            lambda,
            mean_span,
            mask_text: true,
        },
        seed,
    )
}

/// Generate a mask plan.
///
/// Contiguous phoneme spans with lengths drawn uniformly from
/// `[1, 2*mean_span - 1]` are placed without overlap until exactly
/// round(lambda * P) phonemes are covered (the last span is truncated to hit
/// the count); text masks are then sampled uniformly from the remaining
/// phonemes. Fully deterministic given the seed.
pub fn plan_masks_with(
    alignment: &Alignment,
    settings: &MaskSettings,
    seed: u64,
) -> Result<MaskPlan> {
    if !(0.0..=1.0).contains(&settings.lambda) {
        return Err(Error::Masking(format!(
            "lambda {} outside [0, 1]",
            settings.lambda
        )));
    }
    if settings.mean_span == 0 {
        return Err(Error::Masking("mean_span must be >= 1".into()));
    }
    let num_phonemes = alignment.num_phonemes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let target = speech_mask_count(num_phonemes, settings.lambda);
    let mut selected = vec![false; num_phonemes];
    let mut covered = 0usize;
    while covered < target {
        let mut len = rng.gen_range(1..=2 * settings.mean_span - 1);
        len = len.min(target - covered);
        // Feasible starts: positions where `len` consecutive phonemes are
        // still free. Shrink the span if no gap is that large.
        let starts = loop {
            let mut starts = Vec::new();
            let mut run = 0usize;
            for (i, &sel) in selected.iter().enumerate() {
                run = if sel { 0 } else { run + 1 };
                if run >= len {
                    starts.push(i + 1 - len);
                }
            }
            if !starts.is_empty() {
                break starts;
            }
            len -= 1;
        };
        let start = starts[rng.gen_range(0..starts.len())];
        for s in selected.iter_mut().skip(start).take(len) {
            *s = true;
        }
        covered += len;
    }
    let speech_phonemes: BTreeSet<usize> = selected
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect();

    let mut text_phonemes = BTreeSet::new();
    if settings.mask_text {
        let candidates: Vec<usize> = (0..num_phonemes)
            .filter(|i| !speech_phonemes.contains(i))
            .collect();
        let take = text_mask_count(num_phonemes, target);
        let mut shuffled = candidates;
        shuffled.shuffle(&mut rng);
        text_phonemes = shuffled.into_iter().take(take).collect();
    }

    // Expand selected phonemes to coalesced frame ranges.
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for &p in &speech_phonemes {
        let (start, end) = alignment.span(p);
        match ranges.last_mut() {
            Some(last) if last.1 == start => last.1 = end,
            _ => ranges.push((start, end)),
        }
    }

    Ok(MaskPlan {
        lambda: settings.lambda,
        seed,
        speech_phonemes,
        text_phonemes,
        speech_frame_ranges: ranges,
    })
}

/// Spectrogram with masked frames zeroed and flagged. The flag channel keeps
/// sentinel values out of band: legitimate features are never compared
/// against a magic number.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedSpectrogram {
    pub frames: Tensor,
    pub masked: Vec<bool>,
}

impl MaskedSpectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }
}

/// The masked training pair plus the untouched originals.
#[derive(Clone, Debug)]
pub struct MaskedPair {
    pub masked_spec: MaskedSpectrogram,
    pub masked_text: PhonemeSeq,
    pub plan: MaskPlan,
    pub original_spec: LogMelSpectrogram,
    pub original_text: PhonemeSeq,
}

/// Apply a plan: zero+flag frames inside the speech ranges, replace text ids
/// at text-masked positions with MASK_TEXT. Everything else is untouched.
pub fn apply_masks(
    spec: &LogMelSpectrogram,
    text: &PhonemeSeq,
    plan: &MaskPlan,
    vocab: &PhonemeVocab,
) -> Result<MaskedPair> {
    let num_frames = spec.num_frames();
    for &(s, e) in &plan.speech_frame_ranges {
        if s >= e || e > num_frames {
            return Err(Error::Masking(format!(
                "frame range {s}..{e} outside spectrogram of {num_frames} frames"
            )));
        }
    }
    if let Some(&p) = plan.text_phonemes.iter().next_back() {
        if p >= text.len() {
            return Err(Error::Masking(format!(
                "text mask at {p} outside sequence of {}",
                text.len()
            )));
        }
    }

    let mut frames = spec.frames().clone();
    let masked = plan.frame_mask(num_frames);
    for (i, &m) in masked.iter().enumerate() {
        if m {
            for v in frames.row_mut(i) {
                *v = 0.0;
            }
        }
    }
    let mut ids = text.ids.clone();
    for &p in &plan.text_phonemes {
        ids[p] = vocab.mask_id();
    }
    Ok(MaskedPair {
        masked_spec: MaskedSpectrogram { frames, masked },
        masked_text: PhonemeSeq {
            ids,
            language: text.language.clone(),
        },
        plan: plan.clone(),
        original_spec: spec.clone(),
        original_text: text.clone(),
    })
}
