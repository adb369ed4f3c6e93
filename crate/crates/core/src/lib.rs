//! Joint speech-text masked reconstruction for cross-lingual speech synthesis.
//!
//! The crate trains a single Conformer-based network to reconstruct masked
//! log-mel spectrogram spans and masked phonemes from the bilingual context,
//! then reuses that network for two downstream procedures:
//!
//! * **voice cloning** — append mask frames after a speaker prompt and let
//!   the network fill in speech for new-language text;
//! * **speech editing** — excise aligned frames for an edited phoneme span,
//!   insert mask frames sized by a duration predictor, and infill them.
//!
//! Modules mirror the processing stages: [`features`] (audio front-end),
//! [`linguistic`] (phoneme inventories and alignments), [`masking`]
//! (non-overlapping span/phoneme mask plans), [`model`] (network and losses),
//! [`pipeline`] (batching, scheduling, pretraining), [`inference`] (cloning,
//! editing, duration prediction) and [`tools`] (similarity maps, plot export).
//! Everything runs in f64 on the CPU and is deterministic given seeds.

pub mod error;
pub mod features;
pub mod inference;
pub mod linguistic;
pub mod masking;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod tools;

pub use error::{Error, Result};
pub use features::{AudioClip, FeatureConfig, FeatureStats, LogMelSpectrogram};
pub use linguistic::{Alignment, AlignmentSpan, PhonemeSeq, PhonemeVocab};
pub use masking::{MaskPlan, MaskSettings, MaskedPair, MaskedSpectrogram};
pub use model::{Checkpoint, ModelConfig, ModelOutput, SpeechTextModel};
pub use nn::Tensor;
pub use pipeline::{ManifestEntry, RunConfig, TrainConfig};
