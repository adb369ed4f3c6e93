//! Heatmap export: a PNG for eyeballs and a CSV of the raw values for
//! machines. The CSV is the testable artifact and round-trips exactly
//! (values are printed with Rust's shortest-round-trip float formatting).

use super::similarity::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::features::LogMelSpectrogram;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

/// Labeled value grid ready for export.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Row-major, `row_labels.len() x col_labels.len()`.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn from_similarity(m: &SimilarityMatrix) -> Heatmap {
        Heatmap {
            row_labels: m.row_symbols.clone(),
            col_labels: m.col_symbols.clone(),
            values: m.values.clone(),
        }
    }

    /// Rows are frames, columns mel bins.
    pub fn from_spectrogram(spec: &LogMelSpectrogram) -> Heatmap {
        Heatmap {
            row_labels: (0..spec.num_frames()).map(|i| format!("frame{i}")).collect(),
            col_labels: (0..spec.n_mels()).map(|i| format!("mel{i}")).collect(),
            values: spec.frames().data().to_vec(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != self.row_labels.len() * self.col_labels.len() {
            return Err(Error::Feature("heatmap size mismatch".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("heatmap contains NaN/Inf".into()));
        }
        for l in self.row_labels.iter().chain(&self.col_labels) {
            if l.contains(',') || l.contains('"') || l.contains('\n') {
                return Err(Error::Feature(format!("label '{l}' needs CSV quoting")));
            }
        }
        Ok(())
    }

    /// Header row of column labels, then one `label,v0,v1,...` row each.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.check()?;
        let cols = self.col_labels.len();
        let mut out = String::new();
        out.push_str("label");
        for c in &self.col_labels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (r, label) in self.row_labels.iter().enumerate() {
            out.push_str(label);
            for v in &self.values[r * cols..(r + 1) * cols] {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        fs::write(path.as_ref(), out)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Heatmap> {
        let text = fs::read_to_string(path.as_ref())?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Feature("empty CSV".into()))?;
        let col_labels: Vec<String> = header.split(',').skip(1).map(String::from).collect();
        let mut row_labels = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            row_labels.push(
                parts
                    .next()
                    .ok_or_else(|| Error::Feature(format!("line {}: no label", lineno + 2)))?
                    .to_string(),
            );
            for p in parts {
                values.push(p.parse::<f64>().map_err(|_| {
                    Error::Feature(format!("line {}: bad float '{p}'", lineno + 2))
                })?);
            }
        }
        let map = Heatmap {
            row_labels,
            col_labels,
            values,
        };
        map.check()?;
        Ok(map)
    }

    /// Simple blue-to-yellow heatmap, `scale` pixels per cell.
    pub fn write_png(&self, path: impl AsRef<Path>, scale: usize) -> Result<()> {
        self.check()?;
        let scale = scale.max(1);
        let rows = self.row_labels.len();
        let cols = self.col_labels.len();
        if rows == 0 || cols == 0 {
            return Err(Error::Feature("empty heatmap".into()));
        }
        let lo = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let (w, h) = (cols * scale, rows * scale);
        let mut pixels = vec![0u8; w * h * 3];
        for r in 0..rows {
            for c in 0..cols {
                let t = (self.values[r * cols + c] - lo) / span;
                let rgb = [
                    (40.0 + 215.0 * t) as u8,
                    (40.0 + 180.0 * t) as u8,
                    (140.0 - 110.0 * t).max(0.0) as u8,
                ];
                for dy in 0..scale {
                    for dx in 0..scale {
                        let px = ((r * scale + dy) * w + c * scale + dx) * 3;
                        pixels[px..px + 3].copy_from_slice(&rgb);
                    }
                }
            }
        }
        let file = fs::File::create(path.as_ref())?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Feature(format!("png: {e}")))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::Feature(format!("png: {e}")))?;
        Ok(())
    }
}
