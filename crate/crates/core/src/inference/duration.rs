//! Lightweight per-phoneme duration regressor: embedding, two temporal conv
//! layers, linear head predicting log-duration in seconds. Trained on
//! alignment-derived durations with MSE in the log domain. Stands in for an
//! external duration predictor, which is out of scope.

use crate::error::{Error, Result};
use crate::linguistic::{PhonemeSeq, PhonemeVocab};
use crate::model::{read_tensor_sections, write_tensor_sections, xavier, ParamId, ParamSet};
use crate::nn::{Tape, Tensor, Var};
use crate::pipeline::{Adam, AdamConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationModelConfig {
    pub d_model: usize,
    pub kernel: usize,
}

impl Default for DurationModelConfig {
    fn default() -> Self {
        DurationModelConfig {
            d_model: 16,
            kernel: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationTrainConfig {
    pub seed: u64,
    pub steps: usize,
    pub lr: f64,
}

impl Default for DurationTrainConfig {
    fn default() -> Self {
        DurationTrainConfig {
            seed: 0,
            steps: 400,
            lr: 1e-2,
        }
    }
}

pub struct DurationModel {
    config: DurationModelConfig,
    vocab: PhonemeVocab,
    params: ParamSet,
    embed: ParamId,
    conv1_w: ParamId,
    conv1_b: ParamId,
    conv2_w: ParamId,
    conv2_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

impl DurationModel {
    pub fn new(config: DurationModelConfig, vocab: PhonemeVocab, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = ParamSet::new();
        let d = config.d_model;
        let k = config.kernel;
        let embed = set.alloc(
            "dur.embed",
            xavier(&mut rng, vocab.size(), d, &[vocab.size(), d]),
        );
        let conv1_w = set.alloc("dur.conv1.w", xavier(&mut rng, d * k, d, &[d, d, k]));
        let conv1_b = set.alloc("dur.conv1.b", Tensor::zeros(&[d]));
        let conv2_w = set.alloc("dur.conv2.w", xavier(&mut rng, d * k, d, &[d, d, k]));
        let conv2_b = set.alloc("dur.conv2.b", Tensor::zeros(&[d]));
        let out_w = set.alloc("dur.out.w", xavier(&mut rng, d, 1, &[d, 1]));
        let out_b = set.alloc("dur.out.b", Tensor::zeros(&[1]));
        DurationModel {
            config,
            vocab,
            params: set,
            embed,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            out_w,
            out_b,
        }
    }

    pub fn vocab(&self) -> &PhonemeVocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn forward_tape(&self, tape: &mut Tape, pv: &[Var], ids: &[usize]) -> Var {
        let x = tape.embedding(pv[self.embed.0], ids);
        let x = tape.conv1d(x, pv[self.conv1_w.0], pv[self.conv1_b.0]);
        let x = tape.silu(x);
        let x = tape.conv1d(x, pv[self.conv2_w.0], pv[self.conv2_b.0]);
        let x = tape.silu(x);
        let y = tape.matmul(x, pv[self.out_w.0]);
        tape.add_bias(y, pv[self.out_b.0])
    }

    /// Predicted duration in seconds per phoneme (strictly positive).
    pub fn predict(&self, seq: &PhonemeSeq) -> Result<Vec<f64>> {
        if seq.is_empty() {
            return Err(Error::Inference("empty phoneme sequence".into()));
        }
        if let Some(&bad) = seq.ids.iter().find(|&&id| id >= self.vocab.size()) {
            return Err(Error::Inference(format!(
                "phoneme id {bad} outside duration-model vocabulary of {}",
                self.vocab.size()
            )));
        }
        let mut tape = Tape::new();
        let pv = self.params.bind(&mut tape);
        let log_d = self.forward_tape(&mut tape, &pv, &seq.ids);
        Ok(tape.value(log_d).data().iter().map(|v| v.exp()).collect())
    }

    /// Encode symbols against this model's own vocabulary, then predict.
    pub fn predict_symbols(&self, symbols: &[String]) -> Result<Vec<f64>> {
        let seq = self.vocab.encode_phonemes(symbols)?;
        self.predict(&seq)
    }

    /// Full-batch training on (ids, durations-in-seconds) pairs with MSE in
    /// log space.
    pub fn train(
        &mut self,
        data: &[(Vec<usize>, Vec<f64>)],
        cfg: &DurationTrainConfig,
    ) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Training("no duration training data".into()));
        }
        for (ids, durs) in data {
            if ids.len() != durs.len() || ids.is_empty() {
                return Err(Error::Training("malformed duration training pair".into()));
            }
            if durs.iter().any(|&d| !d.is_finite() || d <= 0.0) {
                return Err(Error::Training("non-positive duration in training data".into()));
            }
        }
        let mut adam = Adam::new(&self.params, AdamConfig::default());
        let mut last_loss = f64::INFINITY;
        for _ in 0..cfg.steps {
            let mut grads: Option<Vec<Tensor>> = None;
            let mut loss_sum = 0.0;
            for (ids, durs) in data {
                let mut tape = Tape::new();
                let pv = self.params.bind(&mut tape);
                let pred = self.forward_tape(&mut tape, &pv, ids);
                let target =
                    Tensor::from_vec(&[durs.len(), 1], durs.iter().map(|d| d.ln()).collect());
                let t = tape.constant(target);
                let diff = tape.sub(pred, t);
                let sq = tape.mul(diff, diff);
                let loss = tape.mean_all(sq);
                loss_sum += tape.value(loss).item();
                let mut store = tape.backward(loss);
                let utt_grads: Vec<Tensor> = pv
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        store
                            .take(v)
                            .unwrap_or_else(|| Tensor::zeros(self.params.tensor(i).shape()))
                    })
                    .collect();
                match &mut grads {
                    None => grads = Some(utt_grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(utt_grads) {
                            a.add_assign(&g);
                        }
                    }
                }
            }
            let mut grads = grads.unwrap();
            let n = data.len() as f64;
            for g in grads.iter_mut() {
                g.scale_assign(1.0 / n);
            }
            adam.step(&mut self.params, &grads, cfg.lr)?;
            last_loss = loss_sum / n;
            if !last_loss.is_finite() {
                return Err(Error::Numerical("non-finite duration loss".into()));
            }
        }
        Ok(last_loss)
    }

    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        let sidecar = DurationSidecar {
            version: 1,
            config: self.config,
            vocab: self.vocab.clone(),
            vocab_hash: self.vocab.hash(),
        };
        let json_path = stem.with_extension("json");
        let tmp = json_path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(&sidecar)?)?;
        std::fs::rename(&tmp, &json_path)?;
        let sections: Vec<(String, &Tensor)> = self
            .params
            .iter()
            .map(|(name, t)| (format!("param.{name}"), t))
            .collect();
        write_tensor_sections(&stem.with_extension("bin"), &sections)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DurationModel> {
        let path = path.as_ref();
        let stem = match path.extension().and_then(|e| e.to_str()) {
            Some("json") | Some("bin") => path.with_extension(""),
            _ => path.to_path_buf(),
        };
        let sidecar_bytes = std::fs::read(stem.with_extension("json")).map_err(|e| {
            Error::Checkpoint(format!("cannot read {}: {e}", stem.with_extension("json").display()))
        })?;
        let sidecar: DurationSidecar = serde_json::from_slice(&sidecar_bytes)?;
        let vocab = sidecar.vocab.reindex()?;
        if vocab.hash() != sidecar.vocab_hash {
            return Err(Error::Checkpoint(
                "duration model vocabulary hash mismatch".into(),
            ));
        }
        let mut model = DurationModel::new(sidecar.config, vocab, 0);
        for (name, tensor) in read_tensor_sections(&stem.with_extension("bin"))? {
            let Some(rest) = name.strip_prefix("param.") else {
                return Err(Error::Checkpoint(format!("unknown section '{name}'")));
            };
            let idx = (0..model.params.len())
                .find(|&i| model.params.name(i) == rest)
                .ok_or_else(|| Error::Checkpoint(format!("unknown parameter '{rest}'")))?;
            model.params.set_tensor(idx, tensor)?;
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct DurationSidecar {
    version: u32,
    config: DurationModelConfig,
    vocab: PhonemeVocab,
    vocab_hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linguistic::{merge_vocabs, PhonemeInventory};

    fn vocab() -> PhonemeVocab {
        let syms: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
        merge_vocabs(
            &PhonemeInventory::new("zh", syms).unwrap(),
            &PhonemeInventory::new("en", vec![]).unwrap(),
        )
    }

    #[test]
    fn predictions_are_positive_and_sized() {
        let v = vocab();
        let model = DurationModel::new(DurationModelConfig::default(), v.clone(), 1);
        let seq = v
            .encode_phonemes(&["p0".into(), "p3".into(), "p5".into()])
            .unwrap();
        let durs = model.predict(&seq).unwrap();
        assert_eq!(durs.len(), 3);
        assert!(durs.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn empty_sequence_and_bad_id_are_errors() {
        let v = vocab();
        let model = DurationModel::new(DurationModelConfig::default(), v, 1);
        let empty = PhonemeSeq {
            ids: vec![],
            language: None,
        };
        assert!(model.predict(&empty).is_err());
        let bad = PhonemeSeq {
            ids: vec![99],
            language: None,
        };
        assert!(model.predict(&bad).is_err());
    }

    #[test]
    fn overfits_one_utterance_within_twenty_percent() {
        let v = vocab();
        let mut model = DurationModel::new(DurationModelConfig::default(), v.clone(), 2);
        let ids = vec![0, 1, 2, 3, 4, 5];
        let durs = vec![0.12, 0.3, 0.08, 0.22, 0.15, 0.4];
        model
            .train(
                &[(ids.clone(), durs.clone())],
                &DurationTrainConfig {
                    seed: 0,
                    steps: 600,
                    lr: 1e-2,
                },
            )
            .unwrap();
        let seq = PhonemeSeq {
            ids,
            language: None,
        };
        let pred = model.predict(&seq).unwrap();
        for (p, d) in pred.iter().zip(&durs) {
            assert!(
                (p - d).abs() / d < 0.2,
                "predicted {p}, target {d}"
            );
        }
    }

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let v = vocab();
        let model = DurationModel::new(DurationModelConfig::default(), v.clone(), 3);
        let seq = v.encode_phonemes(&["p1".into(), "p2".into()]).unwrap();
        let before = model.predict(&seq).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("dur");
        model.save(&stem).unwrap();
        let loaded = DurationModel::load(stem.with_extension("json")).unwrap();
        let after = loaded.predict(&seq).unwrap();
        assert_eq!(before, after);
    }
}
