//! Per-phoneme frame spans tying a spectrogram to its transcription.
//!
//! Alignments are consumed from files (or synthesized uniformly); running a
//! forced aligner is out of scope. Spans always partition `[0, num_frames)`
//! with one span per phoneme.

use super::vocab::{PhonemeSeq, PhonemeVocab};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentSpan {
    /// Position in the phoneme sequence.
    pub phoneme: usize,
    /// Inclusive start frame.
    pub start: usize,
    /// Exclusive end frame.
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    spans: Vec<AlignmentSpan>,
    num_frames: usize,
}

impl Alignment {
    /// Validates the partition invariants: sorted, contiguous, starting at
    /// frame 0, ending at `num_frames`, one nonempty span per phoneme.
    pub fn new(spans: Vec<AlignmentSpan>, num_frames: usize) -> Result<Self> {
        if spans.is_empty() {
            return Err(Error::Alignment("alignment has no spans".into()));
        }
        let mut expected_start = 0usize;
        for (k, span) in spans.iter().enumerate() {
            if span.phoneme != k {
                return Err(Error::Alignment(format!(
                    "span {k} is for phoneme {}, expected {k}",
                    span.phoneme
                )));
            }
            if span.start != expected_start {
                return Err(Error::Alignment(format!(
                    "span {k} starts at {} but previous span ended at {expected_start}",
                    span.start
                )));
            }
            if span.end <= span.start {
                return Err(Error::Alignment(format!(
                    "span {k} is empty ({}..{})",
                    span.start, span.end
                )));
            }
            expected_start = span.end;
        }
        if expected_start != num_frames {
            return Err(Error::Alignment(format!(
                "spans end at {expected_start}, expected {num_frames}"
            )));
        }
        Ok(Alignment { spans, num_frames })
    }

    pub fn spans(&self) -> &[AlignmentSpan] {
        &self.spans
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_phonemes(&self) -> usize {
        self.spans.len()
    }

    /// Frame range of phoneme `i`.
    pub fn span(&self, phoneme: usize) -> (usize, usize) {
        let s = &self.spans[phoneme];
        (s.start, s.end)
    }

    /// Phoneme index owning each frame.
    pub fn frame_phonemes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_frames);
        for span in &self.spans {
            out.extend(std::iter::repeat_n(span.phoneme, span.end - span.start));
        }
        out
    }

    /// Durations in seconds per phoneme under the given front-end config.
    pub fn durations_seconds(&self, cfg: &FeatureConfig) -> Vec<f64> {
        let spf = cfg.hop_samples() as f64 / cfg.sample_rate as f64;
        self.spans
            .iter()
            .map(|s| (s.end - s.start) as f64 * spf)
            .collect()
    }
}

/// Evenly split `num_frames` over `num_phonemes`; the first
/// `num_frames % num_phonemes` phonemes take the longer length.
pub fn uniform_alignment(num_frames: usize, num_phonemes: usize) -> Result<Alignment> {
    if num_phonemes == 0 {
        return Err(Error::Alignment("no phonemes to align".into()));
    }
    if num_frames < num_phonemes {
        return Err(Error::Alignment(format!(
            "{num_frames} frames cannot cover {num_phonemes} phonemes"
        )));
    }
    let base = num_frames / num_phonemes;
    let remainder = num_frames % num_phonemes;
    let mut spans = Vec::with_capacity(num_phonemes);
    let mut start = 0;
    for k in 0..num_phonemes {
        let len = base + usize::from(k < remainder);
        spans.push(AlignmentSpan {
            phoneme: k,
            start,
            end: start + len,
        });
        start += len;
    }
    Alignment::new(spans, num_frames)
}

/// Parse a `symbol<TAB>start_sec<TAB>end_sec` TSV produced by a forced
/// aligner. Times are rounded to frames, contiguity is enforced by snapping
/// each start to the previous end, and the final span is clamped/extended to
/// `num_frames`.
pub fn parse_alignment_file(
    path: impl AsRef<Path>,
    num_frames: usize,
    seq: &PhonemeSeq,
    vocab: &PhonemeVocab,
    cfg: &FeatureConfig,
) -> Result<Alignment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Alignment(format!("cannot read {}: {e}", path.display())))?;
    let frames_per_second = cfg.frames_per_second();

    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Alignment(format!(
                "{}:{}: expected 3 tab-separated columns",
                path.display(),
                lineno + 1
            )));
        }
        let start: f64 = cols[1].trim().parse().map_err(|_| {
            Error::Alignment(format!("{}:{}: bad start time", path.display(), lineno + 1))
        })?;
        let end: f64 = cols[2].trim().parse().map_err(|_| {
            Error::Alignment(format!("{}:{}: bad end time", path.display(), lineno + 1))
        })?;
        rows.push((cols[0].trim().to_string(), start, end, lineno + 1));
    }

    if rows.len() != seq.len() {
        return Err(Error::Alignment(format!(
            "{}: {} rows for {} phonemes",
            path.display(),
            rows.len(),
            seq.len()
        )));
    }

    let mut spans = Vec::with_capacity(rows.len());
    let mut prev_end_frame = 0usize;
    let last = rows.len() - 1;
    for (k, (symbol, start_sec, end_sec, lineno)) in rows.into_iter().enumerate() {
        let expected = vocab
            .symbol_of(seq.ids[k])
            .ok_or_else(|| Error::Alignment(format!("phoneme id {} not in vocab", seq.ids[k])))?;
        if symbol != expected {
            return Err(Error::Alignment(format!(
                "{}: row {lineno}: symbol '{symbol}' does not match transcription '{expected}'",
                path.display()
            )));
        }
        if end_sec < start_sec {
            return Err(Error::Alignment(format!(
                "{}: row {lineno}: non-monotonic times {start_sec}..{end_sec}",
                path.display()
            )));
        }
        let start = prev_end_frame; // snap to previous end
        let mut end = (end_sec * frames_per_second).round() as usize;
        if k == last {
            end = num_frames;
        } else {
            end = end.min(num_frames);
        }
        if end <= start {
            return Err(Error::Alignment(format!(
                "{}: row {lineno}: span for '{symbol}' is empty after snapping",
                path.display()
            )));
        }
        spans.push(AlignmentSpan {
            phoneme: k,
            start,
            end,
        });
        prev_end_frame = end;
    }
    Alignment::new(spans, num_frames)
}
