//! Checkpoint container: a binary weights file plus a JSON sidecar carrying
//! the configs, normalization stats, vocabulary and training step. Loading
//! verifies the vocabulary hash. Round trips are bit-exact.

use super::config::ModelConfig;
use super::net::SpeechTextModel;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureStats};
use crate::linguistic::PhonemeVocab;
use crate::nn::Tensor;
use crate::pipeline::TrainConfig;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"SFCK";
const VERSION: u32 = 1;

/// Adam moment estimates, aligned with the parameter set by index.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    /// Adam time step (number of updates applied).
    pub step: usize,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

pub struct Checkpoint {
    pub model: SpeechTextModel,
    pub feature_config: FeatureConfig,
    pub stats: FeatureStats,
    pub vocab: PhonemeVocab,
    /// Training step this checkpoint was taken at.
    pub step: usize,
    pub optimizer: Option<OptimizerState>,
    pub train_config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    model_config: ModelConfig,
    feature_config: FeatureConfig,
    stats: FeatureStats,
    vocab: PhonemeVocab,
    vocab_hash: String,
    step: usize,
    optimizer_step: Option<usize>,
    train_config: Option<TrainConfig>,
}

/// Serialize named tensors: name, dims, f64 little-endian payload.
pub(crate) fn write_tensor_sections(path: &Path, sections: &[(String, &Tensor)]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (name, tensor) in sections {
        let name_bytes = name.as_bytes();
        out.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("bin.tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&out)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn read_tensor_sections(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let fail = |what: &str| Error::Checkpoint(format!("{what}: {}", path.display()));
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(fail("not a checkpoint weights file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported weights version {version}")));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let mut pos = 12usize;
    let mut sections = Vec::with_capacity(count);
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(fail("truncated weights file"));
        }
        let slice = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(slice)
    };
    for _ in 0..count {
        let name_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|_| fail("bad section name"))?;
        let ndim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize);
        }
        let numel: usize = shape.iter().product();
        let data: Vec<f64> = take(&mut pos, numel * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        sections.push((name, Tensor::from_vec(&shape, data)));
    }
    Ok(sections)
}

fn stem_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    (stem.with_extension("json"), stem.with_extension("bin"))
}

impl Checkpoint {
    /// Write `<stem>.json` and `<stem>.bin` (write-temp-then-rename).
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let (json_path, bin_path) = stem_paths(stem.as_ref());
        let sidecar = Sidecar {
            version: VERSION,
            model_config: self.model.config().clone(),
            feature_config: self.feature_config.clone(),
            stats: self.stats.clone(),
            vocab: self.vocab.clone(),
            vocab_hash: self.vocab.hash(),
            step: self.step,
            optimizer_step: self.optimizer.as_ref().map(|o| o.step),
            train_config: self.train_config.clone(),
        };
        let tmp = json_path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&sidecar)?)?;
        fs::rename(&tmp, &json_path)?;

        let mut sections: Vec<(String, &Tensor)> = self
            .model
            .params()
            .iter()
            .map(|(name, tensor)| (format!("param.{name}"), tensor))
            .collect();
        if let Some(opt) = &self.optimizer {
            for (i, t) in opt.m.iter().enumerate() {
                sections.push((format!("adam.m.{}", self.model.params().name(i)), t));
            }
            for (i, t) in opt.v.iter().enumerate() {
                sections.push((format!("adam.v.{}", self.model.params().name(i)), t));
            }
        }
        write_tensor_sections(&bin_path, &sections)
    }

    /// Load from `<stem>`, `<stem>.json` or `<stem>.bin`.
    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let (json_path, bin_path) = stem_paths(path.as_ref());
        let sidecar_bytes = fs::read(&json_path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", json_path.display())))?;
        let sidecar: Sidecar = serde_json::from_slice(&sidecar_bytes)?;
        if sidecar.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                sidecar.version
            )));
        }
        let vocab = sidecar.vocab.reindex()?;
        if vocab.hash() != sidecar.vocab_hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash mismatch: sidecar says {}, contents hash to {}",
                sidecar.vocab_hash,
                vocab.hash()
            )));
        }

        // Structure from config, then overwrite every tensor by name.
        let mut model = SpeechTextModel::new(sidecar.model_config, 0)?;
        let sections = read_tensor_sections(&bin_path)?;
        let mut adam_m: Vec<Option<Tensor>> = vec![None; model.params().len()];
        let mut adam_v: Vec<Option<Tensor>> = vec![None; model.params().len()];
        let mut loaded = vec![false; model.params().len()];
        let index_of = |model: &SpeechTextModel, name: &str| -> Option<usize> {
            (0..model.params().len()).find(|&i| model.params().name(i) == name)
        };
        for (name, tensor) in sections {
            if let Some(rest) = name.strip_prefix("param.") {
                let idx = index_of(&model, rest).ok_or_else(|| {
                    Error::Checkpoint(format!("unknown parameter '{rest}' in weights file"))
                })?;
                model.params_mut().set_tensor(idx, tensor)?;
                loaded[idx] = true;
            } else if let Some(rest) = name.strip_prefix("adam.m.") {
                let idx = index_of(&model, rest)
                    .ok_or_else(|| Error::Checkpoint(format!("unknown adam.m '{rest}'")))?;
                adam_m[idx] = Some(tensor);
            } else if let Some(rest) = name.strip_prefix("adam.v.") {
                let idx = index_of(&model, rest)
                    .ok_or_else(|| Error::Checkpoint(format!("unknown adam.v '{rest}'")))?;
                adam_v[idx] = Some(tensor);
            } else {
                return Err(Error::Checkpoint(format!("unknown section '{name}'")));
            }
        }
        if let Some(missing) = loaded.iter().position(|&l| !l) {
            return Err(Error::Checkpoint(format!(
                "weights file is missing parameter '{}'",
                model.params().name(missing)
            )));
        }
        let optimizer = match sidecar.optimizer_step {
            Some(step) => {
                let m: Option<Vec<Tensor>> = adam_m.into_iter().collect();
                let v: Option<Vec<Tensor>> = adam_v.into_iter().collect();
                match (m, v) {
                    (Some(m), Some(v)) => Some(OptimizerState { step, m, v }),
                    _ => {
                        return Err(Error::Checkpoint(
                            "sidecar promises optimizer state but tensors are missing".into(),
                        ))
                    }
                }
            }
            None => None,
        };
        Ok(Checkpoint {
            model,
            feature_config: sidecar.feature_config,
            stats: sidecar.stats,
            vocab,
            step: sidecar.step,
            optimizer,
            train_config: sidecar.train_config,
        })
    }
}
