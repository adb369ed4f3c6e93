//! Architecture hyperparameters.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Conformer reconstruction network configuration.
///
/// The encoder is 8 Conformer layers whose depthwise-conv kernels are 7 for
/// the first half and 31 for the second, followed by a Conv1d Post-Net over
/// the coarse spectrogram. Sizes not fixed by that recipe (width, heads, FFN
/// multiplier, dropout) default to common Conformer-TTS choices and are all
/// configurable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    /// Depthwise kernel for the first n_layers/2 encoder layers.
    pub kernel_early: usize,
    /// Depthwise kernel for the remaining layers.
    pub kernel_late: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub postnet_layers: usize,
    pub postnet_kernel: usize,
    pub postnet_channels: usize,
    pub n_mels: usize,
    /// Total id count including the two special ids.
    pub vocab_size: usize,
    /// Capacity of the alignment-embedding table (max phonemes/utterance).
    pub max_phonemes: usize,
    pub dropout: f64,
    /// Restrict the spectrogram MAE to masked frames. Off by default: the
    /// reconstruction objective is computed over all frames.
    #[serde(default)]
    pub speech_loss_masked_only: bool,
}

impl ModelConfig {
    /// Full-scale defaults; `vocab_size` comes from the merged vocabulary.
    pub fn full(vocab_size: usize) -> Self {
        ModelConfig {
            d_model: 384,
            n_layers: 8,
            kernel_early: 7,
            kernel_late: 31,
            n_heads: 2,
            ffn_mult: 4,
            postnet_layers: 5,
            postnet_kernel: 5,
            postnet_channels: 256,
            n_mels: 80,
            vocab_size,
            max_phonemes: 512,
            dropout: 0.1,
            speech_loss_masked_only: false,
        }
    }

    /// Desk-scale model used by tests: d_model 32, 2 Conformer layers,
    /// 2-layer Post-Net, no dropout.
    pub fn micro(vocab_size: usize) -> Self {
        ModelConfig {
            d_model: 32,
            n_layers: 2,
            postnet_layers: 2,
            postnet_channels: 32,
            max_phonemes: 64,
            dropout: 0.0,
            ..ModelConfig::full(vocab_size)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Model(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_layers == 0 || self.n_layers % 2 != 0 {
            return Err(Error::Model(format!(
                "n_layers {} must be even to split the two kernel sizes",
                self.n_layers
            )));
        }
        for k in [self.kernel_early, self.kernel_late, self.postnet_kernel] {
            if k % 2 == 0 {
                return Err(Error::Model(format!("kernel size {k} must be odd")));
            }
        }
        if self.postnet_layers == 0 {
            return Err(Error::Model("postnet needs at least one layer".into()));
        }
        if self.n_mels == 0 {
            return Err(Error::Model("n_mels must be positive".into()));
        }
        if self.vocab_size < 3 {
            return Err(Error::Model(
                "vocab_size must cover at least one phoneme plus the special ids".into(),
            ));
        }
        if self.max_phonemes == 0 {
            return Err(Error::Model("max_phonemes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Model(format!(
                "dropout {} must be in [0, 1)",
                self.dropout
            )));
        }
        if self.ffn_mult == 0 {
            return Err(Error::Model("ffn_mult must be positive".into()));
        }
        Ok(())
    }
}
