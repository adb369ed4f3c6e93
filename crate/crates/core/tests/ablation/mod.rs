//! Criterion 6: masking speech+text during pretraining versus masking
//! speech only. Two micro models are trained identically except for the
//! text-mask switch, three seeds each, and compared on held-out
//! masked-region reconstruction L1.

use crate::common;
use specfill::features::{compute_log_mel, normalize_features};
use specfill::linguistic::uniform_alignment;
use specfill::masking::{apply_masks, plan_masks_with, MaskSettings};
use specfill::model::{Checkpoint, Mode, ModelInput};
use specfill::pipeline::run_pretraining;

pub const FRAMES_PER_PHONEME: usize = 10;
pub const PHONEMES_PER_UTT: usize = 12;
pub const TRAIN_UTTS_PER_LANG: usize = 5;
pub const HOLDOUT_UTTS_PER_LANG: usize = 5;
pub const STEPS: usize = 3000;
pub const SEEDS: [u64; 3] = [101, 202, 303];

/// Mean masked-region L1 (normalized domain) over the held-out utterances,
/// with speech-only masking at evaluation time.
pub fn holdout_masked_l1(ckpt: &Checkpoint, corpus: &common::CorpusPaths) -> f64 {
    let cfg = &ckpt.feature_config;
    let mut total = 0.0;
    let mut count = 0usize;
    let eval_settings = MaskSettings {
        lambda: 0.8,
        mean_span: 3,
        mask_text: false,
    };
    for (_id, _lang, indices) in &corpus.holdout {
        let clip = common::tone_utterance(indices, FRAMES_PER_PHONEME, cfg);
        let spec = compute_log_mel(&clip, cfg).unwrap();
        let norm = normalize_features(&spec, &ckpt.stats).unwrap();
        let symbols: Vec<String> = indices.iter().map(|&i| common::symbol(i)).collect();
        let seq = ckpt.vocab.encode_phonemes(&symbols).unwrap();
        let alignment = uniform_alignment(spec.num_frames(), seq.len()).unwrap();
        for seed in 0..8u64 {
            let plan = plan_masks_with(&alignment, &eval_settings, 1000 + seed).unwrap();
            let pair = apply_masks(&norm, &seq, &plan, &ckpt.vocab).unwrap();
            let input = ModelInput::from_masked_pair(&pair, &alignment).unwrap();
            let out = ckpt.model.forward(&input, Mode::Eval).unwrap();
            for (t, &masked) in input.frame_masked.iter().enumerate() {
                if !masked {
                    continue;
                }
                for (p, x) in out.refined_spec.row(t).iter().zip(norm.frames().row(t)) {
                    total += (p - x).abs();
                    count += 1;
                }
            }
        }
    }
    total / count as f64
}

pub fn run_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus_split(
        dir.path(),
        &Default::default(),
        TRAIN_UTTS_PER_LANG,
        HOLDOUT_UTTS_PER_LANG,
        PHONEMES_PER_UTT,
        FRAMES_PER_PHONEME,
        9,
    );
    let mut joint_wins = 0usize;
    for (k, &seed) in SEEDS.iter().enumerate() {
        let mut scores = [0.0f64; 2];
        for (arm, text_mask) in [(0usize, true), (1, false)] {
            let mut run = common::micro_run_config(&corpus, STEPS, seed);
            run.train.text_mask_enabled = text_mask;
            let out = run_pretraining(
                &run,
                &dir.path().join(format!("seed{k}-arm{arm}")),
                None,
            )
            .unwrap();
            scores[arm] = holdout_masked_l1(&out.checkpoint, &corpus);
        }
        let (joint, solo) = (scores[0], scores[1]);
        println!(
            "[acceptance]   ablation seed {seed}: joint {joint:.4} vs speech-only {solo:.4} -> {}",
            if joint <= solo { "joint" } else { "speech-only" }
        );
        joint_wins += usize::from(joint <= solo);
    }
    assert!(
        joint_wins >= 2,
        "joint masking won only {joint_wins}/3 seeds"
    );
}
