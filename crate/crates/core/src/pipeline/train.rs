//! Pretraining: masked reconstruction over bilingual batches with Adam and
//! the Noam schedule, JSON-lines step logging, periodic checkpoints and
//! exact resume.

use super::adam::{Adam, AdamConfig};
use super::batch::{make_batches, BilingualScheduler};
use super::data::{ensure_alignment_capacity, load_utterance};
use super::manifest::load_manifest;
use super::schedule::noam_lr;
use super::{derive_seed, hash_str};
use crate::error::{Error, Result};
use crate::features::{normalize_features, FeatureConfig, FeatureStats};
use crate::linguistic::{load_vocab_file, merge_inventories, Alignment, PhonemeVocab};
use crate::masking::{apply_masks, plan_masks_with, MaskSettings};
use crate::model::{
    Checkpoint, ForwardTargets, Mode, ModelConfig, ModelInput, SpeechTextModel,
};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

fn default_lr_scale() -> f64 {
    1.0
}
fn default_warmup() -> usize {
    4000
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.98
}
fn default_eps() -> f64 {
    1e-9
}
fn default_lambda() -> f64 {
    0.8
}
fn default_mean_span() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_lang_p() -> f64 {
    0.5
}

/// Training hyperparameters and data sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub seed: u64,
    /// Noam scale factor ("initial learning rate" in transformer recipes).
    #[serde(default = "default_lr_scale")]
    pub lr_scale: f64,
    #[serde(default = "default_warmup")]
    pub warmup_steps: usize,
    /// Total-frame budget per batch.
    pub batch_bins: usize,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
    pub max_steps: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mean_span")]
    pub mean_span: usize,
    /// Ablation switch: when off, no phonemes are text-masked and the text
    /// loss is identically zero.
    #[serde(default = "default_true")]
    pub text_mask_enabled: bool,
    /// Probability of drawing the first (alphabetically) language per step.
    #[serde(default = "default_lang_p")]
    pub lang_probability: f64,
    /// Steps between periodic checkpoints; 0 saves only the final one.
    #[serde(default)]
    pub checkpoint_interval: usize,
    /// language tag -> manifest path (one or two languages).
    pub manifests: BTreeMap<String, PathBuf>,
    /// Inventory files merged (in order) into the cross-lingual vocabulary.
    pub vocab_files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps == 0 {
            return Err(Error::Training("warmup_steps must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Training(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.lang_probability) {
            return Err(Error::Training(format!(
                "lang_probability {} outside [0, 1]",
                self.lang_probability
            )));
        }
        if self.batch_bins == 0 {
            return Err(Error::Training("batch_bins must be positive".into()));
        }
        if self.mean_span == 0 {
            return Err(Error::Training("mean_span must be >= 1".into()));
        }
        if self.manifests.is_empty() || self.manifests.len() > 2 {
            return Err(Error::Training(format!(
                "expected 1 or 2 language manifests, got {}",
                self.manifests.len()
            )));
        }
        if self.vocab_files.is_empty() {
            return Err(Error::Training("no vocabulary files".into()));
        }
        Ok(())
    }
}

/// The single JSON config document: front-end, architecture, training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Parse a config file, resolving relative data paths against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Training(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        for p in cfg.train.manifests.values_mut() {
            resolve(p);
        }
        for p in cfg.train.vocab_files.iter_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.train.feature_dir.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }
}

/// One line of the training log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub lr: f64,
    pub loss_speech: f64,
    pub loss_text: f64,
    pub loss_total: f64,
    pub lang: String,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<TrainLogEntry>,
}

struct TrainUtterance {
    id: String,
    normalized: Tensor,
    ids: Vec<usize>,
    alignment: Alignment,
    frames: usize,
}

struct LanguageSet {
    lang: String,
    utterances: Vec<TrainUtterance>,
    batches: Vec<Vec<usize>>,
}

/// Build the merged vocabulary from the configured inventory files.
pub fn build_vocab(train: &TrainConfig) -> Result<PhonemeVocab> {
    let mut inventories = Vec::new();
    for path in &train.vocab_files {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("lang")
            .to_string();
        inventories.push(load_vocab_file(path, &stem)?);
    }
    Ok(merge_inventories(&inventories))
}

fn load_language_sets(
    run: &RunConfig,
    vocab: &PhonemeVocab,
    model_cfg: &ModelConfig,
    stats_override: Option<&FeatureStats>,
) -> Result<(Vec<LanguageSet>, FeatureStats)> {
    let mut raw_sets = Vec::new();
    for (lang, manifest_path) in &run.train.manifests {
        let entries = load_manifest(manifest_path)?;
        if entries.is_empty() {
            return Err(Error::Training(format!("manifest for '{lang}' is empty")));
        }
        let mut utterances = Vec::new();
        for entry in &entries {
            if &entry.lang != lang {
                return Err(Error::Manifest(format!(
                    "utterance '{}' is tagged '{}' but listed under '{lang}'",
                    entry.id, entry.lang
                )));
            }
            let utt = load_utterance(entry, vocab, &run.features, run.train.feature_dir.as_deref())?;
            ensure_alignment_capacity(&utt, model_cfg.max_phonemes)?;
            utterances.push(utt);
        }
        raw_sets.push((lang.clone(), utterances));
    }

    let stats = match stats_override {
        Some(s) => s.clone(),
        None => {
            let all = raw_sets.iter().flat_map(|(_, us)| us.iter().map(|u| &u.spec));
            FeatureStats::from_spectrograms(all)?
        }
    };

    let mut sets = Vec::new();
    for (lang_idx, (lang, utterances)) in raw_sets.into_iter().enumerate() {
        let mut train_utts = Vec::new();
        for u in utterances {
            let normalized = normalize_features(&u.spec, &stats)?;
            train_utts.push(TrainUtterance {
                id: u.id,
                frames: u.spec.num_frames(),
                normalized: normalized.into_frames(),
                ids: u.seq.ids,
                alignment: u.alignment,
            });
        }
        let items: Vec<(String, usize)> = train_utts
            .iter()
            .map(|u| (u.id.clone(), u.frames))
            .collect();
        let batches = make_batches(
            &items,
            run.train.batch_bins,
            Some(derive_seed(&[run.train.seed, lang_idx as u64, 0xba7c])),
        )?;
        sets.push(LanguageSet {
            lang,
            utterances: train_utts,
            batches,
        });
    }
    Ok((sets, stats))
}

fn append_log(path: &Path, entries: &[TrainLogEntry]) -> Result<()> {
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    for e in entries {
        serde_json::to_writer(&mut file, e)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Run (or resume) pretraining and return the final checkpoint plus the
/// per-step log of this run.
pub fn run_pretraining(
    run: &RunConfig,
    out_dir: &Path,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome> {
    run.features.validate()?;
    run.train.validate()?;
    fs::create_dir_all(out_dir)?;

    let vocab = build_vocab(&run.train)?;
    let mut model_cfg = run.model.clone();
    model_cfg.vocab_size = vocab.size();
    model_cfg.validate()?;

    // Resume state: model, optimizer, stats and step come from the
    // checkpoint; data and schedules are rebuilt from the config.
    let (mut model, mut adam, stats_override, start_step) = match resume {
        Some(ckpt) => {
            if ckpt.vocab.hash() != vocab.hash() {
                return Err(Error::Checkpoint(
                    "resume checkpoint was trained with a different vocabulary".into(),
                ));
            }
            if ckpt.model.config() != &model_cfg {
                return Err(Error::Checkpoint(
                    "resume checkpoint was trained with a different model config".into(),
                ));
            }
            let adam_cfg = AdamConfig {
                beta1: run.train.adam_beta1,
                beta2: run.train.adam_beta2,
                eps: run.train.adam_eps,
            };
            let adam = match ckpt.optimizer {
                Some(state) => Adam::from_state(state, adam_cfg),
                None => Adam::new(ckpt.model.params(), adam_cfg),
            };
            (ckpt.model, adam, Some(ckpt.stats), ckpt.step)
        }
        None => {
            let model = SpeechTextModel::new(
                model_cfg.clone(),
                derive_seed(&[run.train.seed, 0x1817]),
            )?;
            let adam = Adam::new(
                model.params(),
                AdamConfig {
                    beta1: run.train.adam_beta1,
                    beta2: run.train.adam_beta2,
                    eps: run.train.adam_eps,
                },
            );
            (model, adam, None, 0)
        }
    };

    let (sets, stats) = load_language_sets(run, &vocab, &model_cfg, stats_override.as_ref())?;

    let mut scheduler = if sets.len() == 2 {
        let mut s = BilingualScheduler::new(
            [sets[0].lang.clone(), sets[1].lang.clone()],
            [sets[0].batches.clone(), sets[1].batches.clone()],
            run.train.lang_probability,
            derive_seed(&[run.train.seed, 0x5ced]),
        )?;
        s.advance_to(start_step as u64);
        Some(s)
    } else {
        None
    };

    let settings = MaskSettings {
        lambda: run.train.lambda,
        mean_span: run.train.mean_span,
        mask_text: run.train.text_mask_enabled,
    };
    let log_path = out_dir.join("train_log.jsonl");
    let mut log = Vec::new();

    let make_checkpoint = |model: &SpeechTextModel, adam: &Adam, step: usize| Checkpoint {
        model: model.clone(),
        feature_config: run.features.clone(),
        stats: stats.clone(),
        vocab: vocab.clone(),
        step,
        optimizer: Some(adam.state().clone()),
        train_config: Some(run.train.clone()),
    };

    for step in start_step + 1..=run.train.max_steps {
        let (lang_idx, batch): (usize, Vec<usize>) = match &mut scheduler {
            Some(s) => {
                let (lang, batch) = s.next(step as u64);
                let lang_idx = sets.iter().position(|set| set.lang == lang).unwrap();
                (lang_idx, batch.to_vec())
            }
            None => {
                let batches = &sets[0].batches;
                (0, batches[(step - 1) % batches.len()].clone())
            }
        };
        let set = &sets[lang_idx];

        let mut grads: Option<Vec<Tensor>> = None;
        let mut speech_sum = 0.0;
        let mut text_sum = 0.0;
        let mut total_sum = 0.0;
        for &utt_idx in &batch {
            let utt = &set.utterances[utt_idx];
            let mask_seed = derive_seed(&[run.train.seed, step as u64, hash_str(&utt.id)]);
            let plan = plan_masks_with(&utt.alignment, &settings, mask_seed)?;
            let spec = crate::features::LogMelSpectrogram::new(
                utt.normalized.clone(),
                run.features.clone(),
            )?;
            let seq = crate::linguistic::PhonemeSeq {
                ids: utt.ids.clone(),
                language: Some(set.lang.clone()),
            };
            let pair = apply_masks(&spec, &seq, &plan, &vocab)?;
            let input = ModelInput::from_masked_pair(&pair, &utt.alignment)?;
            let targets = ForwardTargets {
                speech: &utt.normalized,
                original_text_ids: &utt.ids,
            };
            let dropout_seed = derive_seed(&[run.train.seed, step as u64, hash_str(&utt.id), 0xd709]);
            let fwd = model
                .forward_training(&input, &targets, Mode::Train { dropout_seed })
                .map_err(|e| {
                    Error::Training(format!(
                        "step {step} lang '{}' utterance '{}': {e}",
                        set.lang, utt.id
                    ))
                })?;
            speech_sum += fwd.losses.speech;
            text_sum += fwd.losses.text;
            total_sum += fwd.losses.total;
            let utt_grads = fwd.gradients(model.params());
            match &mut grads {
                None => grads = Some(utt_grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(utt_grads) {
                        a.add_assign(&g);
                    }
                }
            }
        }
        let n = batch.len() as f64;
        let mut grads = grads.expect("batches are never empty");
        for g in grads.iter_mut() {
            g.scale_assign(1.0 / n);
        }
        let lr = noam_lr(step, model.config().d_model, run.train.warmup_steps, run.train.lr_scale)?;
        adam.step(model.params_mut(), &grads, lr)?;

        let entry = TrainLogEntry {
            step,
            lr,
            loss_speech: speech_sum / n,
            loss_text: text_sum / n,
            loss_total: total_sum / n,
            lang: set.lang.clone(),
        };
        if !entry.loss_total.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss at step {step} on language '{}'",
                set.lang
            )));
        }
        log.push(entry);

        if run.train.checkpoint_interval > 0 && step % run.train.checkpoint_interval == 0 {
            make_checkpoint(&model, &adam, step).save(out_dir.join(format!("checkpoint-{step:06}")))?;
        }
    }

    append_log(&log_path, &log)?;
    let final_step = run.train.max_steps.max(start_step);
    let checkpoint = Checkpoint {
        model,
        feature_config: run.features.clone(),
        stats,
        vocab,
        step: final_step,
        optimizer: Some(adam.into_state()),
        train_config: Some(run.train.clone()),
    };
    checkpoint.save(out_dir.join("checkpoint-final"))?;
    Ok(TrainOutcome { checkpoint, log })
}
