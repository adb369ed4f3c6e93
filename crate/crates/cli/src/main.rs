//! Command-line interface: featurize, train, train-duration, mask-plan,
//! reconstruct, clone, edit, phoneme-map.
//!
//! Exit codes: 0 success, 2 validation error, 3 runtime/numerical error.

use clap::{Parser, Subcommand};
use specfill::error::{Error, Result};
use specfill::features::{compute_log_mel, load_audio, save_audio, write_feature_file};
use specfill::inference::{
    clone_voice, edit_speech, reconstruct_masked, CloneRequest, DurationModel,
    DurationModelConfig, DurationTrainConfig, EditOp, EditRequest, SynthesisReport,
    SynthesisResult,
};
use specfill::linguistic::{parse_alignment_file, PhonemeInventory};
use specfill::masking::plan_masks;
use specfill::model::Checkpoint;
use specfill::pipeline::{load_manifest, load_utterance, run_pretraining, RunConfig};
use specfill::tools::{phoneme_similarity, Heatmap};
use specfill::FeatureConfig;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "specfill", version, about = "Masked spectrogram/phoneme reconstruction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract log-mel features for every utterance in a manifest.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 24000)]
        sr: u32,
        #[arg(long, default_value_t = 80)]
        n_mels: usize,
        #[arg(long, default_value_t = 50.0)]
        win_ms: f64,
        #[arg(long, default_value_t = 12.5)]
        hop_ms: f64,
    },
    /// Run (or resume) masked pretraining from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Ablation switch: disable text masking (speech-only objective).
        #[arg(long)]
        no_text_mask: bool,
    },
    /// Train the per-phoneme duration predictor from alignment durations.
    TrainDuration {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Inventory files; defaults to the symbols found in the manifest.
        #[arg(long)]
        vocab: Vec<PathBuf>,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 24000)]
        sr: u32,
        #[arg(long, default_value_t = 80)]
        n_mels: usize,
        #[arg(long, default_value_t = 50.0)]
        win_ms: f64,
        #[arg(long, default_value_t = 12.5)]
        hop_ms: f64,
    },
    /// Print a mask plan over a uniform alignment as JSON.
    MaskPlan {
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        phonemes: usize,
        #[arg(long, default_value_t = 0.8)]
        lambda: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        mean_span: usize,
    },
    /// Mask an utterance and reconstruct the hidden frames.
    Reconstruct {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        utt: String,
        #[arg(long, default_value_t = 0.8)]
        lambda: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Manifest holding the utterance; defaults to the manifests
        /// recorded in the checkpoint's training config.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        mean_span: usize,
        #[arg(long, default_value_t = 60)]
        gl_iters: usize,
    },
    /// Prompt-based cross-lingual voice cloning.
    #[command(name = "clone")]
    CloneVoice {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        dur: PathBuf,
        #[arg(long)]
        prompt_audio: PathBuf,
        #[arg(long)]
        prompt_phonemes: PathBuf,
        #[arg(long)]
        prompt_alignment: PathBuf,
        #[arg(long)]
        target_phonemes: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 60)]
        gl_iters: usize,
    },
    /// Mask-insert speech editing from a JSON request.
    Edit {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        dur: PathBuf,
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 60)]
        gl_iters: usize,
    },
    /// Cosine similarity between phoneme embeddings, as CSV + PNG heatmap.
    PhonemeMap {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        cols: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_png: PathBuf,
    },
}

fn feature_config(sr: u32, n_mels: usize, win_ms: f64, hop_ms: f64) -> FeatureConfig {
    FeatureConfig {
        sample_rate: sr,
        win_ms,
        hop_ms,
        n_mels,
        ..FeatureConfig::default()
    }
}

/// Whitespace-separated phoneme symbols.
fn read_symbols(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Vocab(format!("cannot read {}: {e}", path.display())))?;
    let symbols: Vec<String> = text.split_whitespace().map(String::from).collect();
    if symbols.is_empty() {
        return Err(Error::Vocab(format!("no phonemes in {}", path.display())));
    }
    Ok(symbols)
}

fn write_outputs(
    out_dir: &Path,
    stem: &str,
    result: &SynthesisResult,
    gl_iters: usize,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_feature_file(out_dir.join(format!("{stem}.feat")), &result.features)?;
    let preview = result.preview(gl_iters)?;
    save_audio(out_dir.join(format!("{stem}.wav")), &preview)?;
    std::fs::write(
        out_dir.join(format!("{stem}.json")),
        serde_json::to_vec_pretty(&result.report)?,
    )?;
    println!(
        "{stem}: {} frames ({} masked ranges) -> {}/{stem}.{{feat,wav,json}}",
        result.report.output_frames,
        result.report.masked_ranges.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_featurize(manifest: &Path, out_dir: &Path, cfg: &FeatureConfig) -> Result<()> {
    cfg.validate()?;
    let entries = load_manifest(manifest)?;
    std::fs::create_dir_all(out_dir)?;
    for entry in &entries {
        let clip = load_audio(&entry.audio, cfg.sample_rate)?;
        let spec = compute_log_mel(&clip, cfg)?;
        write_feature_file(out_dir.join(&entry.id).with_extension("feat"), &spec)?;
        println!("{}: {} frames x {} mels", entry.id, spec.num_frames(), spec.n_mels());
    }
    println!("featurized {} utterances", entries.len());
    Ok(())
}

fn cmd_train(
    config: &Path,
    out_dir: &Path,
    resume: Option<&Path>,
    no_text_mask: bool,
) -> Result<()> {
    let mut run = RunConfig::load(config)?;
    if no_text_mask {
        run.train.text_mask_enabled = false;
    }
    let resume_ckpt = resume.map(Checkpoint::load).transpose()?;
    let outcome = run_pretraining(&run, out_dir, resume_ckpt)?;
    if let Some(last) = outcome.log.last() {
        println!(
            "step {}: loss {:.4} (speech {:.4}, text {:.4})",
            last.step, last.loss_total, last.loss_speech, last.loss_text
        );
    }
    println!("final checkpoint: {}/checkpoint-final.{{bin,json}}", out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_duration(
    manifest: &Path,
    out: &Path,
    vocab_files: &[PathBuf],
    steps: usize,
    lr: f64,
    seed: u64,
    cfg: &FeatureConfig,
) -> Result<()> {
    cfg.validate()?;
    let entries = load_manifest(manifest)?;
    if entries.is_empty() {
        return Err(Error::Manifest("empty manifest".into()));
    }
    // Vocabulary: explicit inventory files, or the symbols observed in the
    // manifest. The duration model re-encodes symbols against its own
    // vocabulary at inference, so it does not have to share ids with the
    // main checkpoint.
    let vocab = if vocab_files.is_empty() {
        let mut symbols = BTreeSet::new();
        for e in &entries {
            symbols.extend(e.phonemes.iter().cloned());
        }
        specfill::linguistic::merge_inventories(&[PhonemeInventory::new(
            entries[0].lang.clone(),
            symbols.into_iter().collect(),
        )?])
    } else {
        let mut inventories = Vec::new();
        for path in vocab_files {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("lang")
                .to_string();
            inventories.push(specfill::linguistic::load_vocab_file(path, &stem)?);
        }
        specfill::linguistic::merge_inventories(&inventories)
    };

    let mut data = Vec::new();
    for entry in &entries {
        let utt = load_utterance(entry, &vocab, cfg, None)?;
        let durations = utt.alignment.durations_seconds(cfg);
        data.push((utt.seq.ids, durations));
    }
    let mut model = DurationModel::new(DurationModelConfig::default(), vocab, seed);
    let loss = model.train(&data, &DurationTrainConfig { seed, steps, lr })?;
    model.save(out)?;
    println!(
        "trained duration model on {} utterances, final log-MSE {loss:.6}",
        data.len()
    );
    Ok(())
}

fn cmd_mask_plan(
    frames: usize,
    phonemes: usize,
    lambda: f64,
    seed: u64,
    mean_span: usize,
) -> Result<()> {
    let alignment = specfill::linguistic::uniform_alignment(frames, phonemes)?;
    let plan = plan_masks(&alignment, lambda, mean_span, seed)?;
    println!("{}", serde_json::to_string_pretty(&plan)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_reconstruct(
    ckpt_path: &Path,
    utt: &str,
    lambda: f64,
    seed: u64,
    out_dir: &Path,
    manifest: Option<&Path>,
    mean_span: usize,
    gl_iters: usize,
) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let manifests: Vec<PathBuf> = match manifest {
        Some(m) => vec![m.to_path_buf()],
        None => ckpt
            .train_config
            .as_ref()
            .map(|t| t.manifests.values().cloned().collect())
            .unwrap_or_default(),
    };
    if manifests.is_empty() {
        return Err(Error::Inference(
            "no manifest given and the checkpoint records none; pass --manifest".into(),
        ));
    }
    let mut found = None;
    for m in &manifests {
        if let Some(entry) = load_manifest(m)?.into_iter().find(|e| e.id == utt) {
            found = Some(entry);
            break;
        }
    }
    let entry = found.ok_or_else(|| {
        Error::Inference(format!("utterance '{utt}' not found in the configured manifests"))
    })?;
    let loaded = load_utterance(&entry, &ckpt.vocab, &ckpt.feature_config, None)?;
    let plan = plan_masks(&loaded.alignment, lambda, mean_span, seed)?;
    let masked_ranges = plan.speech_frame_ranges.clone();
    let spec = reconstruct_masked(&loaded.spec, &loaded.seq, &loaded.alignment, &plan, &ckpt)?;
    let result = SynthesisResult {
        report: SynthesisReport {
            output_frames: spec.num_frames(),
            masked_ranges,
            durations: Vec::new(),
        },
        features: spec,
    };
    write_outputs(out_dir, &format!("{utt}-reconstructed"), &result, gl_iters)
}

#[allow(clippy::too_many_arguments)]
fn cmd_clone(
    ckpt_path: &Path,
    dur_path: &Path,
    prompt_audio: &Path,
    prompt_phonemes: &Path,
    prompt_alignment: &Path,
    target_phonemes: &Path,
    out_dir: &Path,
    gl_iters: usize,
) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let dur = DurationModel::load(dur_path)?;
    let clip = load_audio(prompt_audio, ckpt.feature_config.sample_rate)?;
    let prompt_spec = compute_log_mel(&clip, &ckpt.feature_config)?;
    let prompt_syms = read_symbols(prompt_phonemes)?;
    let prompt_seq = ckpt.vocab.encode_phonemes(&prompt_syms)?;
    let alignment = parse_alignment_file(
        prompt_alignment,
        prompt_spec.num_frames(),
        &prompt_seq,
        &ckpt.vocab,
        &ckpt.feature_config,
    )?;
    let target_syms = read_symbols(target_phonemes)?;
    let target_seq = ckpt.vocab.encode_phonemes(&target_syms)?;
    let request = CloneRequest {
        prompt_spec,
        prompt_seq,
        prompt_alignment: alignment,
        target_seq,
        target_symbols: target_syms,
        vocab_hash: ckpt.vocab.hash(),
    };
    let result = clone_voice(&request, &ckpt, &dur)?;
    write_outputs(out_dir, "clone", &result, gl_iters)
}

/// On-disk edit request: paths are resolved relative to the request file.
#[derive(serde::Deserialize)]
struct EditRequestFile {
    audio: PathBuf,
    phonemes: Vec<String>,
    alignment: Option<PathBuf>,
    op: EditOp,
    span: (usize, usize),
    #[serde(default)]
    new_phonemes: Vec<String>,
    #[serde(default)]
    boundary_smooth_frames: usize,
}

fn cmd_edit(
    ckpt_path: &Path,
    dur_path: &Path,
    request_path: &Path,
    out_dir: &Path,
    gl_iters: usize,
) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let dur = DurationModel::load(dur_path)?;
    let text = std::fs::read_to_string(request_path)
        .map_err(|e| Error::Inference(format!("cannot read {}: {e}", request_path.display())))?;
    let file: EditRequestFile = serde_json::from_str(&text)?;
    let base = request_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };

    let clip = load_audio(resolve(&file.audio), ckpt.feature_config.sample_rate)?;
    let spec = compute_log_mel(&clip, &ckpt.feature_config)?;
    let seq = ckpt.vocab.encode_phonemes(&file.phonemes)?;
    let alignment = match &file.alignment {
        Some(a) => parse_alignment_file(
            resolve(a),
            spec.num_frames(),
            &seq,
            &ckpt.vocab,
            &ckpt.feature_config,
        )?,
        None => specfill::linguistic::uniform_alignment(spec.num_frames(), seq.len())?,
    };
    let new_seq = ckpt.vocab.encode_phonemes(&file.new_phonemes)?;
    let request = EditRequest {
        spec,
        seq,
        alignment,
        op: file.op,
        span: file.span,
        new_symbols: file.new_phonemes,
        new_seq,
        vocab_hash: ckpt.vocab.hash(),
        boundary_smooth_frames: file.boundary_smooth_frames,
    };
    let result = edit_speech(&request, &ckpt, &dur)?;
    write_outputs(out_dir, "edit", &result, gl_iters)
}

fn cmd_phoneme_map(
    ckpt_path: &Path,
    rows: &Path,
    cols: &Path,
    out_csv: &Path,
    out_png: &Path,
) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let row_syms = read_symbols(rows)?;
    let col_syms = read_symbols(cols)?;
    let matrix = phoneme_similarity(&ckpt, &row_syms, &col_syms)?;
    for (row, (nearest, sim)) in matrix.row_symbols.iter().zip(&matrix.nearest) {
        println!("{row} -> {nearest} (cosine {sim:.4})");
    }
    let map = Heatmap::from_similarity(&matrix);
    map.write_csv(out_csv)?;
    map.write_png(out_png, 16)?;
    println!("wrote {} and {}", out_csv.display(), out_png.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Featurize {
            manifest,
            out_dir,
            sr,
            n_mels,
            win_ms,
            hop_ms,
        } => cmd_featurize(&manifest, &out_dir, &feature_config(sr, n_mels, win_ms, hop_ms)),
        Command::Train {
            config,
            out_dir,
            resume,
            no_text_mask,
        } => cmd_train(&config, &out_dir, resume.as_deref(), no_text_mask),
        Command::TrainDuration {
            manifest,
            out,
            vocab,
            steps,
            lr,
            seed,
            sr,
            n_mels,
            win_ms,
            hop_ms,
        } => cmd_train_duration(
            &manifest,
            &out,
            &vocab,
            steps,
            lr,
            seed,
            &feature_config(sr, n_mels, win_ms, hop_ms),
        ),
        Command::MaskPlan {
            frames,
            phonemes,
            lambda,
            seed,
            mean_span,
        } => cmd_mask_plan(frames, phonemes, lambda, seed, mean_span),
        Command::Reconstruct {
            ckpt,
            utt,
            lambda,
            seed,
            out_dir,
            manifest,
            mean_span,
            gl_iters,
        } => cmd_reconstruct(
            &ckpt,
            &utt,
            lambda,
            seed,
            &out_dir,
            manifest.as_deref(),
            mean_span,
            gl_iters,
        ),
        Command::CloneVoice {
            ckpt,
            dur,
            prompt_audio,
            prompt_phonemes,
            prompt_alignment,
            target_phonemes,
            out_dir,
            gl_iters,
        } => cmd_clone(
            &ckpt,
            &dur,
            &prompt_audio,
            &prompt_phonemes,
            &prompt_alignment,
            &target_phonemes,
            &out_dir,
            gl_iters,
        ),
        Command::Edit {
            ckpt,
            dur,
            request,
            out_dir,
            gl_iters,
        } => cmd_edit(&ckpt, &dur, &request, &out_dir, gl_iters),
        Command::PhonemeMap {
            ckpt,
            rows,
            cols,
            out_csv,
            out_png,
        } => cmd_phoneme_map(&ckpt, &rows, &cols, &out_csv, &out_png),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(if e.is_validation() { 2 } else { 3 });
        }
    }
}
