//! Per-utterance loading: feature cache or on-the-fly extraction, phoneme
//! encoding and alignment (file or uniform fallback).

use super::manifest::ManifestEntry;
use crate::error::{Error, Result};
use crate::features::{compute_log_mel, load_audio, read_feature_file, FeatureConfig, LogMelSpectrogram};
use crate::linguistic::{parse_alignment_file, uniform_alignment, Alignment, PhonemeSeq, PhonemeVocab};
use std::path::Path;

#[derive(Clone, Debug)]
pub struct LoadedUtterance {
    pub id: String,
    pub lang: String,
    pub spec: LogMelSpectrogram,
    pub seq: PhonemeSeq,
    pub alignment: Alignment,
}

/// Load one manifest entry. If `feature_dir` holds `<id>.feat` with a
/// matching config the cache is used, otherwise features are computed from
/// the audio.
pub fn load_utterance(
    entry: &ManifestEntry,
    vocab: &PhonemeVocab,
    cfg: &FeatureConfig,
    feature_dir: Option<&Path>,
) -> Result<LoadedUtterance> {
    let spec = match feature_dir.map(|d| d.join(&entry.id).with_extension("feat")) {
        Some(path) if path.exists() => {
            let cached = read_feature_file(&path)?;
            if cached.config() != cfg {
                return Err(Error::Feature(format!(
                    "cache {} was built with a different front-end config",
                    path.display()
                )));
            }
            cached
        }
        _ => {
            let clip = load_audio(&entry.audio, cfg.sample_rate)?;
            compute_log_mel(&clip, cfg)?
        }
    };
    let seq = vocab
        .encode_phonemes(&entry.phonemes)
        .map_err(|e| Error::Vocab(format!("utterance '{}': {e}", entry.id)))?
        .with_language(entry.lang.clone());
    let alignment = match &entry.alignment {
        Some(path) => parse_alignment_file(path, spec.num_frames(), &seq, vocab, cfg)
            .map_err(|e| Error::Alignment(format!("utterance '{}': {e}", entry.id)))?,
        None => uniform_alignment(spec.num_frames(), seq.len())
            .map_err(|e| Error::Alignment(format!("utterance '{}': {e}", entry.id)))?,
    };
    Ok(LoadedUtterance {
        id: entry.id.clone(),
        lang: entry.lang.clone(),
        spec,
        seq,
        alignment,
    })
}

/// Alignment fallback check used before training starts.
pub fn ensure_alignment_capacity(utt: &LoadedUtterance, max_phonemes: usize) -> Result<()> {
    if utt.seq.len() > max_phonemes {
        return Err(Error::Model(format!(
            "utterance '{}' has {} phonemes, above the model capacity {max_phonemes}",
            utt.id,
            utt.seq.len()
        )));
    }
    Ok(())
}
