//! Shared fixtures: a synthetic bilingual tone corpus. Each phoneme maps to
//! a fixed sine frequency, so spectrogram content identifies phonemes and a
//! desk-scale model can learn the text/speech correspondence.

#![allow(dead_code)]

use specfill::features::{save_audio, AudioClip, FeatureStats};
use specfill::inference::{DurationModel, DurationModelConfig};
use specfill::linguistic::{merge_vocabs, PhonemeInventory, PhonemeVocab};
use specfill::model::Checkpoint;
use specfill::{FeatureConfig, ModelConfig, RunConfig, SpeechTextModel, TrainConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const NUM_SYMBOLS: usize = 12;
/// alpha owns p00..p07, beta owns p04..p11 (4 shared symbols).
pub const ALPHA_RANGE: std::ops::Range<usize> = 0..8;
pub const BETA_RANGE: std::ops::Range<usize> = 4..12;

pub fn symbol(i: usize) -> String {
    format!("p{i:02}")
}

pub fn tone_freq(i: usize) -> f64 {
    350.0 + 130.0 * i as f64
}

/// Deterministic pseudo-random stream (splitmix64) for fixture generation.
pub struct FixtureRng(u64);

impl FixtureRng {
    pub fn new(seed: u64) -> Self {
        FixtureRng(seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Audio for a phoneme-index sequence: one tone segment per phoneme.
pub fn tone_utterance(
    symbol_indices: &[usize],
    frames_per_phoneme: usize,
    cfg: &FeatureConfig,
) -> AudioClip {
    let hop = cfg.hop_samples();
    let sr = cfg.sample_rate as f64;
    let mut samples = Vec::new();
    for &idx in symbol_indices {
        let freq = tone_freq(idx);
        let seg = frames_per_phoneme * hop;
        for t in 0..seg {
            let phase = 2.0 * std::f64::consts::PI * freq * t as f64 / sr;
            samples.push(0.35 * phase.sin());
        }
    }
    AudioClip::new(samples, cfg.sample_rate).unwrap()
}

pub struct CorpusPaths {
    pub vocab_files: Vec<PathBuf>,
    pub manifests: BTreeMap<String, PathBuf>,
    /// Manifests of utterances held out from training (empty when no split).
    pub holdout_manifests: BTreeMap<String, PathBuf>,
    /// (id, language, symbol indices) for training utterances.
    pub utterances: Vec<(String, String, Vec<usize>)>,
    /// Same, for held-out utterances.
    pub holdout: Vec<(String, String, Vec<usize>)>,
}

/// Write vocab files, tone WAVs and manifests for a bilingual corpus.
/// Alignments are left to the uniform fallback.
pub fn make_corpus(
    dir: &Path,
    cfg: &FeatureConfig,
    utts_per_lang: usize,
    phonemes_per_utt: usize,
    frames_per_phoneme: usize,
    seed: u64,
) -> CorpusPaths {
    make_corpus_split(dir, cfg, utts_per_lang, 0, phonemes_per_utt, frames_per_phoneme, seed)
}

/// As [`make_corpus`], holding out the last `holdout_per_lang` utterances of
/// each language into separate manifests.
pub fn make_corpus_split(
    dir: &Path,
    cfg: &FeatureConfig,
    utts_per_lang: usize,
    holdout_per_lang: usize,
    phonemes_per_utt: usize,
    frames_per_phoneme: usize,
    seed: u64,
) -> CorpusPaths {
    let wav_dir = dir.join("wavs");
    std::fs::create_dir_all(&wav_dir).unwrap();

    let mut vocab_files = Vec::new();
    for (lang, range) in [("alpha", ALPHA_RANGE), ("beta", BETA_RANGE)] {
        let lines: String = range.map(|i| format!("{}\t{lang}\n", symbol(i))).collect();
        let path = dir.join(format!("{lang}.vocab"));
        std::fs::write(&path, lines).unwrap();
        vocab_files.push(path);
    }

    let mut rng = FixtureRng::new(seed);
    let mut manifests = BTreeMap::new();
    let mut holdout_manifests = BTreeMap::new();
    let mut utterances = Vec::new();
    let mut holdout = Vec::new();
    let total = utts_per_lang + holdout_per_lang;
    for (lang, range) in [("alpha", ALPHA_RANGE), ("beta", BETA_RANGE)] {
        let mut train_lines = Vec::new();
        let mut holdout_lines = Vec::new();
        for u in 0..total {
            let id = format!("{lang}-{u:03}");
            let indices: Vec<usize> = (0..phonemes_per_utt)
                .map(|_| range.start + rng.below(range.end - range.start))
                .collect();
            let clip = tone_utterance(&indices, frames_per_phoneme, cfg);
            let wav = wav_dir.join(format!("{id}.wav"));
            save_audio(&wav, &clip).unwrap();
            let phonemes: Vec<String> = indices.iter().map(|&i| symbol(i)).collect();
            let line = serde_json::json!({
                "id": id,
                "audio": wav,
                "lang": lang,
                "phonemes": phonemes,
            })
            .to_string();
            if u < utts_per_lang {
                train_lines.push(line);
                utterances.push((id, lang.to_string(), indices));
            } else {
                holdout_lines.push(line);
                holdout.push((id, lang.to_string(), indices));
            }
        }
        let manifest = dir.join(format!("{lang}.jsonl"));
        std::fs::write(&manifest, train_lines.join("\n")).unwrap();
        manifests.insert(lang.to_string(), manifest);
        if holdout_per_lang > 0 {
            let hm = dir.join(format!("{lang}-holdout.jsonl"));
            std::fs::write(&hm, holdout_lines.join("\n")).unwrap();
            holdout_manifests.insert(lang.to_string(), hm);
        }
    }
    CorpusPaths {
        vocab_files,
        manifests,
        holdout_manifests,
        utterances,
        holdout,
    }
}

/// The bilingual vocabulary the corpus fixtures use.
pub fn corpus_vocab() -> PhonemeVocab {
    let alpha: Vec<String> = ALPHA_RANGE.map(symbol).collect();
    let beta: Vec<String> = BETA_RANGE.map(symbol).collect();
    merge_vocabs(
        &PhonemeInventory::new("alpha", alpha).unwrap(),
        &PhonemeInventory::new("beta", beta).unwrap(),
    )
}

/// Untrained micro checkpoint plus duration model over the corpus
/// vocabulary — a stub model for length-law and splice tests. Identity
/// stats keep normalization out of bit-exactness arguments.
pub fn stub_models(seed: u64) -> (Checkpoint, DurationModel) {
    let vocab = corpus_vocab();
    let mut config = ModelConfig::micro(vocab.size());
    config.max_phonemes = 256;
    let model = SpeechTextModel::new(config, seed).unwrap();
    let ckpt = Checkpoint {
        model,
        feature_config: FeatureConfig::default(),
        stats: FeatureStats::identity(80),
        vocab: vocab.clone(),
        step: 0,
        optimizer: None,
        train_config: None,
    };
    let dur = DurationModel::new(DurationModelConfig::default(), vocab, seed ^ 0xd);
    (ckpt, dur)
}

/// Micro-model run config over a corpus.
pub fn micro_run_config(corpus: &CorpusPaths, max_steps: usize, seed: u64) -> RunConfig {
    RunConfig {
        features: FeatureConfig::default(),
        model: ModelConfig::micro(0), // vocab_size is filled from the vocabulary
        train: TrainConfig {
            seed,
            lr_scale: 0.5,
            warmup_steps: 200,
            batch_bins: 1200,
            adam_beta1: 0.9,
            adam_beta2: 0.98,
            adam_eps: 1e-9,
            max_steps,
            lambda: 0.8,
            mean_span: 3,
            text_mask_enabled: true,
            lang_probability: 0.5,
            checkpoint_interval: 0,
            manifests: corpus.manifests.clone(),
            vocab_files: corpus.vocab_files.clone(),
            feature_dir: None,
        },
    }
}
