//! Resolved inference requests. File parsing lives in the CLI; these types
//! hold data already encoded against the checkpoint vocabulary, plus the raw
//! symbols so the duration model can re-encode against its own vocabulary.

use crate::error::{Error, Result};
use crate::features::LogMelSpectrogram;
use crate::linguistic::{Alignment, PhonemeSeq};
use serde::{Deserialize, Serialize};

/// Prompt-based cross-lingual voice cloning request.
#[derive(Clone, Debug)]
pub struct CloneRequest {
    pub prompt_spec: LogMelSpectrogram,
    pub prompt_seq: PhonemeSeq,
    pub prompt_alignment: Alignment,
    pub target_seq: PhonemeSeq,
    pub target_symbols: Vec<String>,
    /// Hash of the vocabulary the sequences were encoded with; must match
    /// the checkpoint.
    pub vocab_hash: String,
}

impl CloneRequest {
    pub fn validate(&self) -> Result<()> {
        if self.prompt_alignment.num_frames() != self.prompt_spec.num_frames() {
            return Err(Error::Inference(format!(
                "prompt alignment covers {} frames but prompt has {}",
                self.prompt_alignment.num_frames(),
                self.prompt_spec.num_frames()
            )));
        }
        if self.prompt_alignment.num_phonemes() != self.prompt_seq.len() {
            return Err(Error::Inference(
                "prompt alignment does not match prompt phonemes".into(),
            ));
        }
        if self.target_seq.is_empty() {
            return Err(Error::Inference("nothing to synthesize: empty target".into()));
        }
        if self.target_symbols.len() != self.target_seq.len() {
            return Err(Error::Inference("target symbols/ids length mismatch".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Insert,
    Delete,
    Replace,
}

/// Mask-insert speech editing request over a phoneme span `[i, j)`.
#[derive(Clone, Debug)]
pub struct EditRequest {
    pub spec: LogMelSpectrogram,
    pub seq: PhonemeSeq,
    pub alignment: Alignment,
    pub op: EditOp,
    pub span: (usize, usize),
    pub new_symbols: Vec<String>,
    pub new_seq: PhonemeSeq,
    pub vocab_hash: String,
    /// Regenerate this many context frames on each side of the edit
    /// (0 = splice exactly).
    pub boundary_smooth_frames: usize,
}

impl EditRequest {
    pub fn validate(&self) -> Result<()> {
        let p = self.seq.len();
        let (i, j) = self.span;
        if i > j || j > p {
            return Err(Error::Inference(format!(
                "span [{i}, {j}) out of range for {p} phonemes"
            )));
        }
        if self.alignment.num_frames() != self.spec.num_frames()
            || self.alignment.num_phonemes() != p
        {
            return Err(Error::Inference("alignment does not match the utterance".into()));
        }
        if self.new_symbols.len() != self.new_seq.len() {
            return Err(Error::Inference("new symbols/ids length mismatch".into()));
        }
        match self.op {
            EditOp::Insert => {
                if i != j {
                    return Err(Error::Inference(format!(
                        "insert requires an empty span, got [{i}, {j})"
                    )));
                }
                if self.new_seq.is_empty() {
                    return Err(Error::Inference("insert with no new phonemes".into()));
                }
            }
            EditOp::Delete => {
                if !self.new_seq.is_empty() {
                    return Err(Error::Inference("delete must not carry new phonemes".into()));
                }
                if i == j {
                    return Err(Error::Inference("delete of an empty span".into()));
                }
                if j - i == p {
                    return Err(Error::Inference("cannot delete every phoneme".into()));
                }
            }
            EditOp::Replace => {
                if i == j {
                    return Err(Error::Inference("replace of an empty span".into()));
                }
                if self.new_seq.is_empty() {
                    return Err(Error::Inference("replace with no new phonemes".into()));
                }
            }
        }
        Ok(())
    }
}
