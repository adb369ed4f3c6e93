//! The reconstruction network: joint input embedding with mask-vector
//! substitution, Conformer encoder over the concatenated speech+text
//! sequence, spectrogram head with Post-Net refinement, and phoneme head.

use super::config::ModelConfig;
use super::params::{uniform, xavier, ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::linguistic::Alignment;
use crate::masking::MaskedPair;
use crate::nn::{Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub(crate) struct NormP {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LinearP {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct FfnP {
    ln: NormP,
    w1: LinearP,
    w2: LinearP,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct AttnP {
    ln: NormP,
    q: LinearP,
    k: LinearP,
    v: LinearP,
    o: LinearP,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvModuleP {
    ln: NormP,
    pw1: LinearP,
    dw_w: ParamId,
    dw_b: ParamId,
    ln2: NormP,
    pw2: LinearP,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BlockP {
    ffn1: FfnP,
    attn: AttnP,
    conv: ConvModuleP,
    ffn2: FfnP,
    ln_final: NormP,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct PostnetLayerP {
    w: ParamId,
    b: ParamId,
    activated: bool,
}

/// Dropout behavior for one pass.
#[derive(Clone, Copy, Debug)]
pub enum Mode {
    /// Deterministic: dropout off.
    Eval,
    /// Dropout driven by a per-pass seed so runs are reproducible.
    Train { dropout_seed: u64 },
}

/// Network inputs for one utterance: masked frames plus flags, the phoneme
/// index owning each frame, and the (possibly text-masked) phoneme ids.
#[derive(Clone, Debug)]
pub struct ModelInput {
    pub frames: Tensor,
    pub frame_masked: Vec<bool>,
    pub frame_phoneme: Vec<usize>,
    pub text_ids: Vec<usize>,
    pub text_masked: Vec<bool>,
}

impl ModelInput {
    pub fn from_masked_pair(pair: &MaskedPair, alignment: &Alignment) -> Result<Self> {
        let num_frames = pair.masked_spec.num_frames();
        if alignment.num_frames() != num_frames {
            return Err(Error::Model(format!(
                "alignment covers {} frames but spectrogram has {num_frames}",
                alignment.num_frames()
            )));
        }
        if alignment.num_phonemes() != pair.masked_text.len() {
            return Err(Error::Model(format!(
                "alignment has {} phonemes but text has {}",
                alignment.num_phonemes(),
                pair.masked_text.len()
            )));
        }
        let mut text_masked = vec![false; pair.masked_text.len()];
        for &p in &pair.plan.text_phonemes {
            text_masked[p] = true;
        }
        Ok(ModelInput {
            frames: pair.masked_spec.frames.clone(),
            frame_masked: pair.masked_spec.masked.clone(),
            frame_phoneme: alignment.frame_phonemes(),
            text_ids: pair.masked_text.ids.clone(),
            text_masked,
        })
    }

    /// Inference-side assembly: no text masking, explicit frame flags.
    pub fn for_inference(
        frames: Tensor,
        frame_masked: Vec<bool>,
        frame_phoneme: Vec<usize>,
        text_ids: Vec<usize>,
    ) -> Self {
        let text_len = text_ids.len();
        ModelInput {
            frames,
            frame_masked,
            frame_phoneme,
            text_ids,
            text_masked: vec![false; text_len],
        }
    }

    pub fn speech_len(&self) -> usize {
        self.frames.rows()
    }

    pub fn text_len(&self) -> usize {
        self.text_ids.len()
    }
}

/// The embedded joint sequence: speech block then text block.
#[derive(Clone, Debug)]
pub struct JointInput {
    pub embedded: Tensor,
    pub speech_len: usize,
    pub text_len: usize,
    pub frame_masked: Vec<bool>,
    pub text_masked: Vec<bool>,
}

/// Network outputs for one utterance.
#[derive(Clone, Debug)]
pub struct ModelOutput {
    /// Encoder-head spectrogram (the pre-Post-Net term).
    pub coarse_spec: Tensor,
    /// Coarse plus Post-Net residual.
    pub refined_spec: Tensor,
    pub text_logits: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValues {
    pub speech: f64,
    pub text: f64,
    pub total: f64,
}

/// Reconstruction targets for a training pass.
pub struct ForwardTargets<'a> {
    /// Unmasked spectrogram, `|s| x n_mels` (normalized domain).
    pub speech: &'a Tensor,
    /// Unmasked phoneme ids, `|x|` long.
    pub original_text_ids: &'a [usize],
}

/// A completed training pass holding the tape for gradient extraction.
pub struct TrainingForward {
    pub output: ModelOutput,
    pub losses: LossValues,
    tape: Tape,
    loss_var: Var,
    param_vars: Vec<Var>,
}

impl TrainingForward {
    /// Gradient of the total loss per parameter, aligned with the parameter
    /// set (zeros for parameters the loss does not reach).
    pub fn gradients(&self, params: &ParamSet) -> Vec<Tensor> {
        let mut store = self.tape.backward(self.loss_var);
        self.param_vars
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                store
                    .take(v)
                    .unwrap_or_else(|| Tensor::zeros(params.tensor(i).shape()))
            })
            .collect()
    }
}

struct OutVars {
    coarse: Var,
    refined: Var,
    logits: Var,
}

#[derive(Clone)]
pub struct SpeechTextModel {
    config: ModelConfig,
    params: ParamSet,
    acoustic_fc1: LinearP,
    acoustic_fc2: LinearP,
    eps_speech: ParamId,
    phoneme_table: ParamId,
    align_table: ParamId,
    blocks: Vec<BlockP>,
    postnet: Vec<PostnetLayerP>,
    speech_head: LinearP,
    text_head: LinearP,
}

impl SpeechTextModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = ParamSet::new();
        let d = config.d_model;

        let linear = |set: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, i: usize, o: usize| LinearP {
            w: set.alloc(format!("{name}.w"), xavier(rng, i, o, &[i, o])),
            b: set.alloc(format!("{name}.b"), Tensor::zeros(&[o])),
        };
        let mut norm = |set: &mut ParamSet, name: &str, d: usize| NormP {
            gain: set.alloc(format!("{name}.gain"), Tensor::filled(&[d], 1.0)),
            bias: set.alloc(format!("{name}.bias"), Tensor::zeros(&[d])),
        };

        let acoustic_fc1 = linear(&mut set, &mut rng, "acoustic.fc1", config.n_mels, d);
        let acoustic_fc2 = linear(&mut set, &mut rng, "acoustic.fc2", d, d);
        let eps_speech = set.alloc("mask.speech", uniform(&mut rng, 0.1, &[d]));
        let phoneme_table = set.alloc(
            "embed.phoneme",
            uniform(&mut rng, 0.1, &[config.vocab_size, d]),
        );
        let align_table = set.alloc(
            "embed.alignment",
            uniform(&mut rng, 0.1, &[config.max_phonemes, d]),
        );

        let hidden = d * config.ffn_mult;
        let mut blocks = Vec::with_capacity(config.n_layers);
        for layer in 0..config.n_layers {
            let kernel = if layer < config.n_layers / 2 {
                config.kernel_early
            } else {
                config.kernel_late
            };
            let p = format!("encoder.{layer}");
            let ffn = |set: &mut ParamSet, rng: &mut ChaCha8Rng, norm: &mut dyn FnMut(&mut ParamSet, &str, usize) -> NormP, tag: &str| FfnP {
                ln: norm(set, &format!("{p}.{tag}.ln"), d),
                w1: LinearP {
                    w: set.alloc(format!("{p}.{tag}.w1.w"), xavier(rng, d, hidden, &[d, hidden])),
                    b: set.alloc(format!("{p}.{tag}.w1.b"), Tensor::zeros(&[hidden])),
                },
                w2: LinearP {
                    w: set.alloc(format!("{p}.{tag}.w2.w"), xavier(rng, hidden, d, &[hidden, d])),
                    b: set.alloc(format!("{p}.{tag}.w2.b"), Tensor::zeros(&[d])),
                },
            };
            let ffn1 = ffn(&mut set, &mut rng, &mut norm, "ffn1");
            let attn = AttnP {
                ln: norm(&mut set, &format!("{p}.attn.ln"), d),
                q: linear(&mut set, &mut rng, &format!("{p}.attn.q"), d, d),
                k: linear(&mut set, &mut rng, &format!("{p}.attn.k"), d, d),
                v: linear(&mut set, &mut rng, &format!("{p}.attn.v"), d, d),
                o: linear(&mut set, &mut rng, &format!("{p}.attn.o"), d, d),
            };
            let conv = ConvModuleP {
                ln: norm(&mut set, &format!("{p}.conv.ln"), d),
                pw1: linear(&mut set, &mut rng, &format!("{p}.conv.pw1"), d, 2 * d),
                dw_w: set.alloc(
                    format!("{p}.conv.dw.w"),
                    uniform(&mut rng, (1.0 / kernel as f64).sqrt(), &[kernel, d]),
                ),
                dw_b: set.alloc(format!("{p}.conv.dw.b"), Tensor::zeros(&[d])),
                ln2: norm(&mut set, &format!("{p}.conv.ln2"), d),
                pw2: linear(&mut set, &mut rng, &format!("{p}.conv.pw2"), d, d),
            };
            let ffn2 = ffn(&mut set, &mut rng, &mut norm, "ffn2");
            let ln_final = norm(&mut set, &format!("{p}.final.ln"), d);
            blocks.push(BlockP {
                ffn1,
                attn,
                conv,
                ffn2,
                ln_final,
            });
        }

        // Post-Net: Conv1d stack with tanh on all but the last layer,
        // added to the coarse output as a residual.
        let mut postnet = Vec::with_capacity(config.postnet_layers);
        let k = config.postnet_kernel;
        let c = config.postnet_channels;
        let m = config.n_mels;
        for layer in 0..config.postnet_layers {
            let last = layer + 1 == config.postnet_layers;
            let (c_in, c_out) = if config.postnet_layers == 1 {
                (m, m)
            } else if layer == 0 {
                (m, c)
            } else if last {
                (c, m)
            } else {
                (c, c)
            };
            postnet.push(PostnetLayerP {
                w: set.alloc(
                    format!("postnet.{layer}.w"),
                    xavier(&mut rng, c_in * k, c_out, &[c_out, c_in, k]),
                ),
                b: set.alloc(format!("postnet.{layer}.b"), Tensor::zeros(&[c_out])),
                activated: !last,
            });
        }

        let speech_head = linear(&mut set, &mut rng, "head.speech", d, config.n_mels);
        let text_head = linear(&mut set, &mut rng, "head.text", d, config.vocab_size);

        Ok(SpeechTextModel {
            config,
            params: set,
            acoustic_fc1,
            acoustic_fc2,
            eps_speech,
            phoneme_table,
            align_table,
            blocks,
            postnet,
            speech_head,
            text_head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Rows of the phoneme embedding table (used by the similarity tooling).
    pub fn phoneme_embedding(&self, id: usize) -> Result<&[f64]> {
        let table = self.params.value(self.phoneme_table);
        if id >= table.rows() {
            return Err(Error::Model(format!("phoneme id {id} out of range")));
        }
        Ok(table.row(id))
    }

    fn validate_input(&self, input: &ModelInput) -> Result<()> {
        let s = input.speech_len();
        let x = input.text_len();
        if input.frames.cols() != self.config.n_mels {
            return Err(Error::Model(format!(
                "frames have {} bins, model expects {}",
                input.frames.cols(),
                self.config.n_mels
            )));
        }
        if input.frame_masked.len() != s || input.frame_phoneme.len() != s {
            return Err(Error::Model("frame annotations do not match length".into()));
        }
        if input.text_masked.len() != x {
            return Err(Error::Model("text mask does not match length".into()));
        }
        if x == 0 || s == 0 {
            return Err(Error::Model("empty speech or text sequence".into()));
        }
        if x > self.config.max_phonemes {
            return Err(Error::Model(format!(
                "{x} phonemes exceed the alignment table capacity {}",
                self.config.max_phonemes
            )));
        }
        if let Some(&p) = input.frame_phoneme.iter().max() {
            if p >= self.config.max_phonemes {
                return Err(Error::Model(format!(
                    "frame phoneme index {p} exceeds capacity {}",
                    self.config.max_phonemes
                )));
            }
        }
        if let Some(&id) = input.text_ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(Error::Model(format!(
                "phoneme id {id} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    fn linear(&self, tape: &mut Tape, pv: &[Var], p: LinearP, x: Var) -> Var {
        let y = tape.matmul(x, pv[p.w.0]);
        tape.add_bias(y, pv[p.b.0])
    }

    fn layer_norm(&self, tape: &mut Tape, pv: &[Var], p: NormP, x: Var) -> Var {
        tape.layer_norm(x, pv[p.gain.0], pv[p.bias.0], 1e-6)
    }

    fn maybe_dropout(&self, tape: &mut Tape, x: Var, rng: &mut Option<ChaCha8Rng>) -> Var {
        match rng {
            Some(rng) if self.config.dropout > 0.0 => tape.dropout(x, self.config.dropout, rng),
            _ => x,
        }
    }

    /// Content + positional + alignment embeddings for both modalities,
    /// concatenated speech-then-text. Masked frames contribute the learned
    /// speech mask vector instead of encoded content; masked phonemes hit
    /// the mask row of the embedding table.
    fn embed_on_tape(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        input: &ModelInput,
        rng: &mut Option<ChaCha8Rng>,
    ) -> Var {
        let d = self.config.d_model;

        // Speech block.
        let frames = tape.constant(input.frames.clone());
        let h = self.linear(tape, pv, self.acoustic_fc1, frames);
        let h = tape.silu(h);
        let enc = self.linear(tape, pv, self.acoustic_fc2, h);
        let content = tape.substitute_rows(enc, pv[self.eps_speech.0], &input.frame_masked);
        let pos_s = tape.constant(sinusoidal(input.speech_len(), d));
        let aln_s = tape.embedding(pv[self.align_table.0], &input.frame_phoneme);
        let speech = tape.add(content, pos_s);
        let speech = tape.add(speech, aln_s);

        // Text block; positions restart at zero.
        let emb = tape.embedding(pv[self.phoneme_table.0], &input.text_ids);
        let pos_t = tape.constant(sinusoidal(input.text_len(), d));
        let text_positions: Vec<usize> = (0..input.text_len()).collect();
        let aln_t = tape.embedding(pv[self.align_table.0], &text_positions);
        let text = tape.add(emb, pos_t);
        let text = tape.add(text, aln_t);

        let joint = tape.concat_rows(speech, text);
        self.maybe_dropout(tape, joint, rng)
    }

    fn ffn(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        p: FfnP,
        x: Var,
        rng: &mut Option<ChaCha8Rng>,
    ) -> Var {
        let h = self.layer_norm(tape, pv, p.ln, x);
        let h = self.linear(tape, pv, p.w1, h);
        let h = tape.silu(h);
        let h = self.maybe_dropout(tape, h, rng);
        let h = self.linear(tape, pv, p.w2, h);
        self.maybe_dropout(tape, h, rng)
    }

    fn attention(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        p: AttnP,
        x: Var,
        rng: &mut Option<ChaCha8Rng>,
    ) -> Var {
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let h = self.layer_norm(tape, pv, p.ln, x);
        let q = self.linear(tape, pv, p.q, h);
        let k = self.linear(tape, pv, p.k, h);
        let v = self.linear(tape, pv, p.v, h);
        let mut contexts = Vec::with_capacity(heads);
        for head in 0..heads {
            let (lo, hi) = (head * dh, (head + 1) * dh);
            let qh = tape.slice_cols(q, lo, hi);
            let kh = tape.slice_cols(k, lo, hi);
            let vh = tape.slice_cols(v, lo, hi);
            let scores = tape.matmul_bt(qh, kh);
            let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
            let probs = tape.softmax_rows(scores);
            contexts.push(tape.matmul(probs, vh));
        }
        let ctx = if contexts.len() == 1 {
            contexts[0]
        } else {
            tape.concat_cols(&contexts)
        };
        let out = self.linear(tape, pv, p.o, ctx);
        self.maybe_dropout(tape, out, rng)
    }

    fn conv_module(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        p: ConvModuleP,
        x: Var,
        rng: &mut Option<ChaCha8Rng>,
    ) -> Var {
        let d = self.config.d_model;
        let h = self.layer_norm(tape, pv, p.ln, x);
        let h = self.linear(tape, pv, p.pw1, h);
        // GLU gate.
        let a = tape.slice_cols(h, 0, d);
        let b = tape.slice_cols(h, d, 2 * d);
        let gate = tape.sigmoid(b);
        let h = tape.mul(a, gate);
        let h = tape.depthwise_conv1d(h, pv[p.dw_w.0], pv[p.dw_b.0]);
        let h = self.layer_norm(tape, pv, p.ln2, h);
        let h = tape.silu(h);
        let h = self.linear(tape, pv, p.pw2, h);
        self.maybe_dropout(tape, h, rng)
    }

    fn block(
        &self,
        tape: &mut Tape,
        pv: &[Var],
        p: &BlockP,
        x: Var,
        rng: &mut Option<ChaCha8Rng>,
    ) -> Var {
        let f1 = self.ffn(tape, pv, p.ffn1, x, rng);
        let f1 = tape.scale(f1, 0.5);
        let x = tape.add(x, f1);
        let a = self.attention(tape, pv, p.attn, x, rng);
        let x = tape.add(x, a);
        let c = self.conv_module(tape, pv, p.conv, x, rng);
        let x = tape.add(x, c);
        let f2 = self.ffn(tape, pv, p.ffn2, x, rng);
        let f2 = tape.scale(f2, 0.5);
        let x = tape.add(x, f2);
        self.layer_norm(tape, pv, p.ln_final, x)
    }

    fn run(
        &self,
        tape: &mut Tape,
        input: &ModelInput,
        mode: Mode,
    ) -> Result<(Vec<Var>, OutVars)> {
        self.validate_input(input)?;
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train { dropout_seed } => Some(ChaCha8Rng::seed_from_u64(dropout_seed)),
        };
        let pv = self.params.bind(tape);
        let mut x = self.embed_on_tape(tape, &pv, input, &mut rng);
        for block in &self.blocks {
            x = self.block(tape, &pv, block, x, &mut rng);
        }
        let s = input.speech_len();
        let enc_s = tape.slice_rows(x, 0, s);
        let coarse = self.linear(tape, &pv, self.speech_head, enc_s);
        let mut residual = coarse;
        for layer in &self.postnet {
            residual = tape.conv1d(residual, pv[layer.w.0], pv[layer.b.0]);
            if layer.activated {
                residual = tape.tanh(residual);
            }
        }
        let refined = tape.add(coarse, residual);
        let enc_x = tape.slice_rows(x, s, s + input.text_len());
        let logits = self.linear(tape, &pv, self.text_head, enc_x);
        Ok((
            pv,
            OutVars {
                coarse,
                refined,
                logits,
            },
        ))
    }

    fn collect_output(&self, tape: &Tape, out: &OutVars) -> Result<ModelOutput> {
        let output = ModelOutput {
            coarse_spec: tape.value(out.coarse).clone(),
            refined_spec: tape.value(out.refined).clone(),
            text_logits: tape.value(out.logits).clone(),
        };
        output.coarse_spec.ensure_finite("coarse spectrogram")?;
        output.refined_spec.ensure_finite("refined spectrogram")?;
        output.text_logits.ensure_finite("text logits")?;
        Ok(output)
    }

    /// Run the Conformer encoder alone over an embedded joint sequence
    /// (deterministic, dropout off). Length-preserving: the output has one
    /// d_model row per input position.
    pub fn encode(&self, joint: &JointInput) -> Result<Tensor> {
        if joint.embedded.cols() != self.config.d_model {
            return Err(Error::Model(format!(
                "embedded width {} does not match d_model {}",
                joint.embedded.cols(),
                self.config.d_model
            )));
        }
        if joint.embedded.rows() != joint.speech_len + joint.text_len {
            return Err(Error::Model("embedded length mismatch".into()));
        }
        let mut tape = Tape::new();
        let pv = self.params.bind(&mut tape);
        let mut x = tape.constant(joint.embedded.clone());
        for block in &self.blocks {
            x = self.block(&mut tape, &pv, block, x, &mut None);
        }
        Ok(tape.value(x).clone())
    }

    /// Inference pass: outputs only.
    pub fn forward(&self, input: &ModelInput, mode: Mode) -> Result<ModelOutput> {
        let mut tape = Tape::new();
        let (_pv, out) = self.run(&mut tape, input, mode)?;
        self.collect_output(&tape, &out)
    }

    /// Training pass: outputs, losses and a tape for gradient extraction.
    pub fn forward_training(
        &self,
        input: &ModelInput,
        targets: &ForwardTargets<'_>,
        mode: Mode,
    ) -> Result<TrainingForward> {
        if targets.speech.shape() != [input.speech_len(), self.config.n_mels] {
            return Err(Error::Model(format!(
                "speech target shape {:?} does not match ({}, {})",
                targets.speech.shape(),
                input.speech_len(),
                self.config.n_mels
            )));
        }
        if targets.original_text_ids.len() != input.text_len() {
            return Err(Error::Model("text target length mismatch".into()));
        }
        targets.speech.ensure_finite("speech target")?;

        let mut tape = Tape::new();
        let (pv, out) = self.run(&mut tape, input, mode)?;

        let row_mask: Option<&[bool]> = if self.config.speech_loss_masked_only {
            Some(&input.frame_masked)
        } else {
            None
        };
        let mae_refined = tape.mean_abs_diff(out.refined, targets.speech, row_mask);
        let mae_coarse = tape.mean_abs_diff(out.coarse, targets.speech, row_mask);
        let speech_loss = tape.add(mae_refined, mae_coarse);

        let rows: Vec<usize> = input
            .text_masked
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        let ce_targets: Vec<usize> = rows.iter().map(|&r| targets.original_text_ids[r]).collect();
        if let Some(&bad) = ce_targets.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::Model(format!(
                "text target id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        let text_loss = tape.masked_cross_entropy(out.logits, &rows, &ce_targets);
        let total = tape.add(speech_loss, text_loss);

        let losses = LossValues {
            speech: tape.value(speech_loss).item(),
            text: tape.value(text_loss).item(),
            total: tape.value(total).item(),
        };
        if !losses.total.is_finite() {
            return Err(Error::Numerical("non-finite loss".into()));
        }
        let output = self.collect_output(&tape, &out)?;
        Ok(TrainingForward {
            output,
            losses,
            tape,
            loss_var: total,
            param_vars: pv,
        })
    }
}

/// Sinusoidal positions, restarting at zero for each modality block.
pub fn sinusoidal(len: usize, d: usize) -> Tensor {
    let mut out = Tensor::zeros(&[len, d]);
    for i in 0..len {
        let row = out.row_mut(i);
        for (k, slot) in row.iter_mut().enumerate() {
            let pair = (k / 2 * 2) as f64;
            let angle = i as f64 / 10000f64.powf(pair / d as f64);
            *slot = if k % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

/// Run the input layer only and return the embedded joint sequence
/// (deterministic, dropout off).
pub fn embed_inputs(
    pair: &MaskedPair,
    alignment: &Alignment,
    model: &SpeechTextModel,
) -> Result<JointInput> {
    let input = ModelInput::from_masked_pair(pair, alignment)?;
    model.validate_input(&input)?;
    let mut tape = Tape::new();
    let pv = model.params.bind(&mut tape);
    let embedded = model.embed_on_tape(&mut tape, &pv, &input, &mut None);
    Ok(JointInput {
        embedded: tape.value(embedded).clone(),
        speech_len: input.speech_len(),
        text_len: input.text_len(),
        frame_masked: input.frame_masked,
        text_masked: input.text_masked,
    })
}
