//! Length laws and splice semantics for cloning, editing and masked
//! reconstruction, exercised against an untrained stub checkpoint.

mod common;

use specfill::features::{compute_log_mel, LogMelSpectrogram};
use specfill::inference::{
    clone_voice, durations_to_frames, edit_speech, reconstruct_masked, CloneRequest, EditOp,
    EditRequest,
};
use specfill::linguistic::uniform_alignment;
use specfill::masking::MaskPlan;
use specfill::model::Checkpoint;
use specfill::inference::DurationModel;
use specfill::PhonemeSeq;
use std::collections::BTreeSet;

/// Tone utterance features plus matching sequence/alignment over the corpus
/// vocabulary.
fn utterance(
    ckpt: &Checkpoint,
    indices: &[usize],
    frames_per_phoneme: usize,
) -> (LogMelSpectrogram, PhonemeSeq, specfill::Alignment) {
    let cfg = &ckpt.feature_config;
    let clip = common::tone_utterance(indices, frames_per_phoneme, cfg);
    let spec = compute_log_mel(&clip, cfg).unwrap();
    let symbols: Vec<String> = indices.iter().map(|&i| common::symbol(i)).collect();
    let seq = ckpt.vocab.encode_phonemes(&symbols).unwrap();
    let alignment = uniform_alignment(spec.num_frames(), seq.len()).unwrap();
    (spec, seq, alignment)
}

fn clone_request(ckpt: &Checkpoint, prompt: &[usize], target: &[usize]) -> CloneRequest {
    let (spec, seq, alignment) = utterance(ckpt, prompt, 20);
    let target_symbols: Vec<String> = target.iter().map(|&i| common::symbol(i)).collect();
    let target_seq = ckpt.vocab.encode_phonemes(&target_symbols).unwrap();
    CloneRequest {
        prompt_spec: spec,
        prompt_seq: seq,
        prompt_alignment: alignment,
        target_seq,
        target_symbols,
        vocab_hash: ckpt.vocab.hash(),
    }
}

#[test]
fn clone_output_length_is_prompt_plus_predicted_frames() {
    let (ckpt, dur) = common::stub_models(1);
    let req = clone_request(&ckpt, &[0, 1, 2, 3], &[5, 6, 7]);
    let prompt_frames = req.prompt_spec.num_frames();

    let durations = dur.predict_symbols(&req.target_symbols).unwrap();
    let expected: usize = durations_to_frames(&durations, &ckpt.feature_config)
        .unwrap()
        .iter()
        .sum();

    let result = clone_voice(&req, &ckpt, &dur).unwrap();
    assert_eq!(result.report.output_frames, prompt_frames + expected);
    assert_eq!(result.features.num_frames(), prompt_frames + expected);
    assert_eq!(
        result.report.masked_ranges,
        vec![(prompt_frames, prompt_frames + expected)]
    );

    // Prompt region comes back bit-identical.
    for t in 0..prompt_frames {
        assert_eq!(result.features.frames().row(t), req.prompt_spec.frames().row(t));
    }
}

#[test]
fn clone_rejects_empty_target_and_hash_mismatch() {
    let (ckpt, dur) = common::stub_models(2);
    let mut req = clone_request(&ckpt, &[0, 1, 2], &[5]);
    req.target_seq = PhonemeSeq {
        ids: vec![],
        language: None,
    };
    req.target_symbols.clear();
    assert!(clone_voice(&req, &ckpt, &dur).is_err());

    let mut req = clone_request(&ckpt, &[0, 1, 2], &[5]);
    req.vocab_hash = "deadbeefdeadbeef".into();
    let err = clone_voice(&req, &ckpt, &dur).unwrap_err();
    assert!(err.to_string().contains("hash"), "{err}");
}

fn edit_request(
    ckpt: &Checkpoint,
    indices: &[usize],
    op: EditOp,
    span: (usize, usize),
    new: &[usize],
) -> EditRequest {
    let (spec, seq, alignment) = utterance(ckpt, indices, 20);
    let new_symbols: Vec<String> = new.iter().map(|&i| common::symbol(i)).collect();
    let new_seq = ckpt.vocab.encode_phonemes(&new_symbols).unwrap();
    EditRequest {
        spec,
        seq,
        alignment,
        op,
        span,
        new_symbols,
        new_seq,
        vocab_hash: ckpt.vocab.hash(),
        boundary_smooth_frames: 0,
    }
}

#[test]
fn delete_splices_out_the_aligned_region_exactly() {
    let (ckpt, dur) = common::stub_models(3);
    // 20 phonemes x 20 frames = 400 frames + 1; delete phonemes [4, 6).
    let indices: Vec<usize> = (0..20).map(|i| i % 8).collect();
    let req = edit_request(&ckpt, &indices, EditOp::Delete, (4, 6), &[]);
    let num_frames = req.spec.num_frames();
    let (rs, _) = req.alignment.span(4);
    let (_, re) = req.alignment.span(5);

    let result = edit_speech(&req, &ckpt, &dur).unwrap();
    assert_eq!(result.report.output_frames, num_frames - (re - rs));
    assert!(result.report.masked_ranges.is_empty());
    assert!(result.report.durations.is_empty());

    for t in 0..rs {
        assert_eq!(result.features.frames().row(t), req.spec.frames().row(t));
    }
    for t in re..num_frames {
        assert_eq!(
            result.features.frames().row(t - (re - rs)),
            req.spec.frames().row(t)
        );
    }
}

#[test]
fn replace_length_bookkeeping_and_context_preservation() {
    let (ckpt, dur) = common::stub_models(4);
    let indices: Vec<usize> = (0..10).map(|i| i % 8).collect();
    let req = edit_request(&ckpt, &indices, EditOp::Replace, (3, 5), &[6, 7, 4]);
    let num_frames = req.spec.num_frames();
    let (rs, _) = req.alignment.span(3);
    let (_, re) = req.alignment.span(4);

    let durations = dur.predict_symbols(&req.new_symbols).unwrap();
    let inserted: usize = durations_to_frames(&durations, &ckpt.feature_config)
        .unwrap()
        .iter()
        .sum();

    let result = edit_speech(&req, &ckpt, &dur).unwrap();
    assert_eq!(
        result.report.output_frames,
        num_frames - (re - rs) + inserted
    );
    assert_eq!(result.report.masked_ranges, vec![(rs, rs + inserted)]);

    // Out-of-region frames match the original bit-for-bit.
    for t in 0..rs {
        assert_eq!(result.features.frames().row(t), req.spec.frames().row(t));
    }
    for t in re..num_frames {
        assert_eq!(
            result.features.frames().row(t - (re - rs) + inserted),
            req.spec.frames().row(t)
        );
    }
}

#[test]
fn insert_adds_predicted_frames_at_the_insertion_point() {
    let (ckpt, dur) = common::stub_models(5);
    let indices: Vec<usize> = (0..8).collect();
    let req = edit_request(&ckpt, &indices, EditOp::Insert, (4, 4), &[1, 2]);
    let num_frames = req.spec.num_frames();
    let point = req.alignment.span(4).0;

    let durations = dur.predict_symbols(&req.new_symbols).unwrap();
    let inserted: usize = durations_to_frames(&durations, &ckpt.feature_config)
        .unwrap()
        .iter()
        .sum();

    let result = edit_speech(&req, &ckpt, &dur).unwrap();
    assert_eq!(result.report.output_frames, num_frames + inserted);
    for t in 0..point {
        assert_eq!(result.features.frames().row(t), req.spec.frames().row(t));
    }
    for t in point..num_frames {
        assert_eq!(
            result.features.frames().row(t + inserted),
            req.spec.frames().row(t)
        );
    }
}

#[test]
fn invalid_edit_requests_are_rejected() {
    let (ckpt, dur) = common::stub_models(6);
    let indices: Vec<usize> = (0..6).collect();

    // Span out of range.
    let req = edit_request(&ckpt, &indices, EditOp::Replace, (4, 9), &[1]);
    assert!(edit_speech(&req, &ckpt, &dur).is_err());

    // Insert with a nonempty span.
    let req = edit_request(&ckpt, &indices, EditOp::Insert, (2, 3), &[1]);
    assert!(edit_speech(&req, &ckpt, &dur).is_err());

    // Delete carrying new phonemes.
    let req = edit_request(&ckpt, &indices, EditOp::Delete, (2, 3), &[1]);
    assert!(edit_speech(&req, &ckpt, &dur).is_err());

    // Hash mismatch.
    let mut req = edit_request(&ckpt, &indices, EditOp::Delete, (2, 3), &[]);
    req.vocab_hash = "0000000000000000".into();
    assert!(edit_speech(&req, &ckpt, &dur).is_err());
}

#[test]
fn delete_with_boundary_smoothing_regenerates_context() {
    let (ckpt, dur) = common::stub_models(7);
    let indices: Vec<usize> = (0..10).collect();
    let mut req = edit_request(&ckpt, &indices, EditOp::Delete, (4, 5), &[]);
    req.boundary_smooth_frames = 3;
    let (rs, re) = req.alignment.span(4);
    let num_frames = req.spec.num_frames();

    let result = edit_speech(&req, &ckpt, &dur).unwrap();
    assert_eq!(result.report.output_frames, num_frames - (re - rs));
    assert_eq!(result.report.masked_ranges, vec![(rs - 3, rs + 3)]);
    // Frames outside the smoothing margin stay bit-identical.
    for t in 0..rs - 3 {
        assert_eq!(result.features.frames().row(t), req.spec.frames().row(t));
    }
    for t in re + 3..num_frames {
        assert_eq!(
            result.features.frames().row(t - (re - rs)),
            req.spec.frames().row(t)
        );
    }
}

#[test]
fn reconstruct_with_empty_plan_is_identity() {
    let (ckpt, _dur) = common::stub_models(8);
    let (spec, seq, alignment) = utterance(&ckpt, &[0, 1, 2, 3, 4], 20);
    let out = reconstruct_masked(&spec, &seq, &alignment, &MaskPlan::empty(), &ckpt).unwrap();
    assert_eq!(out.frames(), spec.frames());
}

#[test]
fn reconstruct_touches_only_planned_frames() {
    let (ckpt, _dur) = common::stub_models(9);
    let (spec, seq, alignment) = utterance(&ckpt, &[0, 1, 2, 3, 4], 20);
    let plan = MaskPlan {
        lambda: 0.2,
        seed: 0,
        speech_phonemes: BTreeSet::from([0]),
        text_phonemes: BTreeSet::new(),
        speech_frame_ranges: vec![alignment.span(0)],
    };
    let (ms, me) = alignment.span(0);
    let out = reconstruct_masked(&spec, &seq, &alignment, &plan, &ckpt).unwrap();
    assert_eq!(out.num_frames(), spec.num_frames());
    for t in 0..spec.num_frames() {
        if t >= ms && t < me {
            assert_ne!(out.frames().row(t), spec.frames().row(t), "frame {t} unchanged");
        } else {
            assert_eq!(out.frames().row(t), spec.frames().row(t), "frame {t} changed");
        }
    }
}

#[test]
fn duration_model_rejects_symbols_outside_its_vocabulary() {
    let (_ckpt, dur) = common::stub_models(10);
    let err = dur.predict_symbols(&["zz".to_string()]).unwrap_err();
    assert!(err.to_string().contains("zz"), "{err}");
    assert!(DurationModel::load("/nonexistent/dur.json").is_err());
}
