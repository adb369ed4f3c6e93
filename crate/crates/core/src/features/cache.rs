//! Per-utterance feature cache files. Binary container: magic, version,
//! JSON-encoded FeatureConfig header, then the frame matrix as little-endian
//! f64 — bit-exact on round trip.

use super::{FeatureConfig, LogMelSpectrogram};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use std::fs;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"SFLM";
const VERSION: u32 = 1;

pub fn write_feature_file(path: impl AsRef<Path>, spec: &LogMelSpectrogram) -> Result<()> {
    let header = serde_json::to_vec(spec.config())?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(spec.num_frames() as u64).to_le_bytes());
    out.extend_from_slice(&(spec.n_mels() as u64).to_le_bytes());
    for &v in spec.frames().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path.as_ref())?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<LogMelSpectrogram> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::Feature(format!("cannot read {}: {e}", path.display())))?;
    let fail = |what: &str| Error::Feature(format!("{what}: {}", path.display()));
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(fail("not a feature file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported feature file version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let mut pos = 12;
    if bytes.len() < pos + header_len + 16 {
        return Err(fail("truncated feature file"));
    }
    let config: FeatureConfig = serde_json::from_slice(&bytes[pos..pos + header_len])?;
    pos += header_len;
    let num_frames = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()) as usize;
    let n_mels = u64::from_le_bytes(bytes[pos + 8..pos + 16].try_into().unwrap()) as usize;
    pos += 16;
    let expected = num_frames * n_mels * 8;
    if bytes.len() != pos + expected {
        return Err(fail("feature payload size mismatch"));
    }
    let data: Vec<f64> = bytes[pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LogMelSpectrogram::new(Tensor::from_vec(&[num_frames, n_mels], data), config)
}
