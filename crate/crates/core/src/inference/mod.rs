//! Downstream inference: duration prediction, frame arithmetic, prompt-based
//! voice cloning, mask-insert speech editing and masked reconstruction.

mod duration;
mod frames;
mod requests;
mod synth;

pub use duration::{DurationModel, DurationModelConfig, DurationTrainConfig};
pub use frames::{durations_to_frames, total_frames};
pub use requests::{CloneRequest, EditOp, EditRequest};
pub use synth::{clone_voice, edit_speech, reconstruct_masked, SynthesisReport, SynthesisResult};
