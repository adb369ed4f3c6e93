//! Phoneme inventories, cross-lingual vocabulary merging, sequence encoding
//! and forced-alignment ingestion.

mod alignment;
mod vocab;

pub use alignment::{parse_alignment_file, uniform_alignment, Alignment, AlignmentSpan};
pub use vocab::{
    load_vocab_file, merge_inventories, merge_vocabs, PhonemeInventory, PhonemeSeq, PhonemeVocab,
};
