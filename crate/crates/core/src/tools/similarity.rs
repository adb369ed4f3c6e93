//! Cross-lingual phoneme similarity from trained embeddings: cosine over
//! phoneme-embedding-table rows, with a per-row nearest neighbor.

use crate::error::{Error, Result};
use crate::model::Checkpoint;

#[derive(Clone, Debug)]
pub struct SimilarityMatrix {
    pub row_symbols: Vec<String>,
    pub col_symbols: Vec<String>,
    /// Row-major `rows x cols` cosine values in [-1, 1].
    pub values: Vec<f64>,
    /// Per row: (nearest column symbol, its similarity).
    pub nearest: Vec<(String, f64)>,
}

impl SimilarityMatrix {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.col_symbols.len() + col]
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Pairwise cosine similarity between the embeddings of two symbol subsets.
pub fn phoneme_similarity(
    ckpt: &Checkpoint,
    subset_a: &[String],
    subset_b: &[String],
) -> Result<SimilarityMatrix> {
    let embed = |symbol: &String| -> Result<&[f64]> {
        let id = ckpt
            .vocab
            .id_of(symbol)
            .ok_or_else(|| Error::Vocab(format!("unknown phoneme '{symbol}'")))?;
        ckpt.model.phoneme_embedding(id)
    };
    let rows: Vec<&[f64]> = subset_a.iter().map(embed).collect::<Result<_>>()?;
    let cols: Vec<&[f64]> = subset_b.iter().map(embed).collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(rows.len() * cols.len());
    let mut nearest = Vec::with_capacity(rows.len());
    for r in &rows {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (ci, c) in cols.iter().enumerate() {
            let v = cosine(r, c);
            values.push(v);
            if v > best.1 {
                best = (ci, v);
            }
        }
        nearest.push((subset_b[best.0].clone(), best.1));
    }
    let matrix = SimilarityMatrix {
        row_symbols: subset_a.to_vec(),
        col_symbols: subset_b.to_vec(),
        values,
        nearest,
    };
    if matrix.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite similarity value".into()));
    }
    Ok(matrix)
}
