//! The neural core: input embeddings with mask substitution, Conformer
//! encoder, Post-Net refinement and the joint reconstruction loss.

mod checkpoint;
mod config;
mod losses;
mod net;
mod params;

pub use checkpoint::{Checkpoint, OptimizerState};
pub use config::ModelConfig;
pub use losses::{speech_loss, speech_loss_masked_only, text_loss, total_loss};
pub use net::{
    embed_inputs, sinusoidal, ForwardTargets, JointInput, LossValues, Mode, ModelInput,
    ModelOutput, SpeechTextModel, TrainingForward,
};
pub use params::{ParamId, ParamSet};

pub(crate) use checkpoint::{read_tensor_sections, write_tensor_sections};
pub(crate) use params::xavier;
