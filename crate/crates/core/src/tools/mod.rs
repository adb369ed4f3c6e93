//! Analysis utilities: phoneme-similarity mapping and heatmap/CSV export.

mod plot;
mod similarity;

pub use plot::Heatmap;
pub use similarity::{phoneme_similarity, SimilarityMatrix};
