//! End-to-end pipeline behavior on a synthetic corpus: training progress,
//! zero-step runs, checkpointing and exact resume.

mod common;

use specfill::model::Checkpoint;
use specfill::pipeline::run_pretraining;
use specfill::TrainConfig;

#[test]
fn zero_steps_returns_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus(dir.path(), &Default::default(), 1, 6, 20, 1);
    let run = common::micro_run_config(&corpus, 0, 7);
    let out = run_pretraining(&run, &dir.path().join("out"), None).unwrap();
    assert_eq!(out.checkpoint.step, 0);
    assert!(out.log.is_empty());

    // Same seed, fresh model: parameters must be identical (no updates ran).
    let fresh = specfill::SpeechTextModel::new(
        out.checkpoint.model.config().clone(),
        specfill::pipeline::derive_seed(&[7, 0x1817]),
    )
    .unwrap();
    for i in 0..fresh.params().len() {
        assert_eq!(
            fresh.params().tensor(i),
            out.checkpoint.model.params().tensor(i),
            "parameter {} changed",
            fresh.params().name(i)
        );
    }
}

#[test]
fn short_training_runs_and_loss_is_finite() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus(dir.path(), &Default::default(), 2, 6, 20, 2);
    let run = common::micro_run_config(&corpus, 8, 11);
    let out = run_pretraining(&run, &dir.path().join("out"), None).unwrap();
    assert_eq!(out.log.len(), 8);
    assert!(out.log.iter().all(|e| e.loss_total.is_finite()));
    assert!(out.log.iter().all(|e| e.lang == "alpha" || e.lang == "beta"));
    assert!(dir.path().join("out/checkpoint-final.json").exists());
    assert!(dir.path().join("out/train_log.jsonl").exists());
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus(dir.path(), &Default::default(), 2, 6, 20, 3);

    // Uninterrupted: 12 steps.
    let full_run = common::micro_run_config(&corpus, 12, 23);
    let full = run_pretraining(&full_run, &dir.path().join("full"), None).unwrap();

    // Interrupted: 6 steps, checkpoint, then resume to 12.
    let mut half_cfg = common::micro_run_config(&corpus, 6, 23);
    let half = run_pretraining(&half_cfg, &dir.path().join("half"), None).unwrap();
    assert_eq!(half.checkpoint.step, 6);
    half_cfg.train.max_steps = 12;
    let resumed_ckpt = Checkpoint::load(dir.path().join("half/checkpoint-final.json")).unwrap();
    let resumed =
        run_pretraining(&half_cfg, &dir.path().join("resumed"), Some(resumed_ckpt)).unwrap();

    assert_eq!(resumed.log.len(), 6);
    for (a, b) in full.log[6..].iter().zip(resumed.log.iter()) {
        assert_eq!(a.step, b.step);
        assert_eq!(a.lang, b.lang);
        assert!(
            (a.loss_total - b.loss_total).abs() <= 1e-5,
            "step {}: {} vs {}",
            a.step,
            a.loss_total,
            b.loss_total
        );
    }

    // Final parameters agree bit-for-bit.
    for i in 0..full.checkpoint.model.params().len() {
        assert_eq!(
            full.checkpoint.model.params().tensor(i),
            resumed.checkpoint.model.params().tensor(i)
        );
    }
}

#[test]
fn no_text_mask_run_has_zero_text_loss() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus(dir.path(), &Default::default(), 2, 6, 20, 4);
    let mut run = common::micro_run_config(&corpus, 5, 31);
    run.train.text_mask_enabled = false;
    let out = run_pretraining(&run, &dir.path().join("out"), None).unwrap();
    assert!(out.log.iter().all(|e| e.loss_text == 0.0));
    assert!(out.log.iter().all(|e| e.loss_total == e.loss_speech));
}

#[test]
fn oversized_utterance_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus(dir.path(), &Default::default(), 1, 6, 20, 5);
    let mut run = common::micro_run_config(&corpus, 3, 1);
    run.train.batch_bins = 50; // every utterance has ~121 frames
    let err = match run_pretraining(&run, &dir.path().join("out"), None) {
        Err(e) => e,
        Ok(_) => panic!("oversized utterance accepted"),
    };
    assert!(err.to_string().contains("alpha-000"), "{err}");
}

#[test]
fn config_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus(dir.path(), &Default::default(), 1, 4, 20, 6);
    let run = common::micro_run_config(&corpus, 2, 1);
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&run).unwrap()).unwrap();
    let loaded = specfill::RunConfig::load(&path).unwrap();
    assert_eq!(loaded.train, run.train);
    assert_eq!(loaded.features, run.features);
}

#[test]
fn train_config_validation_catches_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::make_corpus(dir.path(), &Default::default(), 1, 4, 20, 7);
    let base = common::micro_run_config(&corpus, 2, 1);

    let mut bad = base.clone();
    bad.train.lambda = 1.5;
    assert!(bad.train.validate().is_err());

    let mut bad = base.clone();
    bad.train.warmup_steps = 0;
    assert!(bad.train.validate().is_err());

    let mut bad = base.clone();
    bad.train.manifests = Default::default();
    assert!(bad.train.validate().is_err());

    let ok: TrainConfig = base.train.clone();
    assert!(ok.validate().is_ok());
}
