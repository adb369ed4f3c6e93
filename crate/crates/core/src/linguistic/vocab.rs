//! Closed phoneme vocabularies over a merged cross-lingual inventory.
//!
//! No UNK token exists: grapheme-to-phoneme conversion happens upstream, so
//! an unknown symbol is a hard error rather than a silent mispronunciation.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

/// One phoneme inventory for one language: an ordered, duplicate-free list
/// of symbols tagged with the language they come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhonemeInventory {
    pub language: String,
    pub symbols: Vec<String>,
}

impl PhonemeInventory {
    pub fn new(language: impl Into<String>, symbols: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &symbols {
            if !seen.insert(s.clone()) {
                return Err(Error::Vocab(format!("duplicate symbol '{s}' in inventory")));
            }
        }
        Ok(PhonemeInventory {
            language: language.into(),
            symbols,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub symbol: String,
    pub languages: BTreeSet<String>,
}

/// Merged vocabulary. Phoneme ids are dense 0..P-1 in entry order; two
/// special ids (text mask, padding) follow the phonemes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeVocab {
    entries: Vec<VocabEntry>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PhonemeVocab {
    pub fn from_entries(entries: Vec<VocabEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (id, e) in entries.iter().enumerate() {
            if index.insert(e.symbol.clone(), id).is_some() {
                return Err(Error::Vocab(format!("duplicate symbol '{}'", e.symbol)));
            }
        }
        Ok(PhonemeVocab { entries, index })
    }

    /// Rebuild the symbol index after deserialization.
    pub fn reindex(mut self) -> Result<Self> {
        let entries = std::mem::take(&mut self.entries);
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Number of phoneme entries (excludes the two special ids).
    pub fn num_phonemes(&self) -> usize {
        self.entries.len()
    }

    /// Total id count including MASK_TEXT and PAD.
    pub fn size(&self) -> usize {
        self.entries.len() + 2
    }

    pub fn mask_id(&self) -> usize {
        self.entries.len()
    }

    pub fn pad_id(&self) -> usize {
        self.entries.len() + 1
    }

    pub fn id_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol_of(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(|e| e.symbol.as_str())
    }

    /// Map symbols to ids; unknown symbols report the offending symbol and
    /// its position.
    pub fn encode_phonemes(&self, symbols: &[String]) -> Result<PhonemeSeq> {
        let mut ids = Vec::with_capacity(symbols.len());
        for (pos, s) in symbols.iter().enumerate() {
            match self.id_of(s) {
                Some(id) => ids.push(id),
                None => {
                    return Err(Error::Vocab(format!(
                        "unknown phoneme '{s}' at position {pos}"
                    )))
                }
            }
        }
        Ok(PhonemeSeq {
            ids,
            language: None,
        })
    }

    /// Inverse of [`encode_phonemes`]; special ids render as <mask>/<pad>.
    pub fn decode(&self, seq: &PhonemeSeq) -> Vec<String> {
        seq.ids
            .iter()
            .map(|&id| {
                if id == self.mask_id() {
                    "<mask>".to_string()
                } else if id == self.pad_id() {
                    "<pad>".to_string()
                } else {
                    self.symbol_of(id).unwrap_or("<bad>").to_string()
                }
            })
            .collect()
    }

    /// FNV-1a over entries in id order; checkpoints verify this at load.
    pub fn hash(&self) -> String {
        let mut text = String::new();
        for e in &self.entries {
            let langs: Vec<&str> = e.languages.iter().map(String::as_str).collect();
            let _ = write!(text, "{}|{};", e.symbol, langs.join(","));
        }
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Union by symbol: `a`'s order first, then `b`'s novel symbols; shared
/// symbols carry both language tags.
pub fn merge_vocabs(a: &PhonemeInventory, b: &PhonemeInventory) -> PhonemeVocab {
    merge_inventories(&[a.clone(), b.clone()])
}

/// Fold any number of inventories left to right under the same union rule.
pub fn merge_inventories(inventories: &[PhonemeInventory]) -> PhonemeVocab {
    let mut entries: Vec<VocabEntry> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for inv in inventories {
        for s in &inv.symbols {
            match index.get(s) {
                Some(&i) => {
                    entries[i].languages.insert(inv.language.clone());
                }
                None => {
                    index.insert(s.clone(), entries.len());
                    entries.push(VocabEntry {
                        symbol: s.clone(),
                        languages: BTreeSet::from([inv.language.clone()]),
                    });
                }
            }
        }
    }
    PhonemeVocab::from_entries(entries).expect("inventories are duplicate-free")
}

/// Vocabulary file: one `symbol<TAB>lang[,lang...]` per line, line order
/// defining ids. A missing language column defaults to the given tag.
pub fn load_vocab_file(path: impl AsRef<Path>, default_language: &str) -> Result<PhonemeInventory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Vocab(format!("cannot read {}: {e}", path.display())))?;
    let mut symbols = Vec::new();
    let mut languages: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let symbol = parts.next().unwrap().to_string();
        if let Some(langs) = parts.next() {
            let first = langs.split(',').next().unwrap_or(default_language);
            match &languages {
                None => languages = Some(first.to_string()),
                Some(l) if l != first => {
                    return Err(Error::Vocab(format!(
                        "{}:{}: mixed languages in one inventory file",
                        path.display(),
                        lineno + 1
                    )));
                }
                _ => {}
            }
        }
        symbols.push(symbol);
    }
    PhonemeInventory::new(languages.unwrap_or_else(|| default_language.to_string()), symbols)
}

/// Encoded transcription. Language is metadata only; no language token is
/// ever fed to the model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeSeq {
    pub ids: Vec<usize>,
    pub language: Option<String>,
}

impl PhonemeSeq {
    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = Some(language.into());
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv(lang: &str, syms: &[&str]) -> PhonemeInventory {
        PhonemeInventory::new(lang, syms.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn merge_unions_by_symbol_and_tags_shared_entries() {
        let v = merge_vocabs(&inv("zh", &["a", "b", "c"]), &inv("en", &["b", "d"]));
        assert_eq!(v.num_phonemes(), 4);
        let b = &v.entries()[v.id_of("b").unwrap()];
        assert_eq!(b.languages, BTreeSet::from(["zh".to_string(), "en".to_string()]));
        assert_eq!(v.id_of("a"), Some(0));
        assert_eq!(v.id_of("d"), Some(3));
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let v = merge_vocabs(&inv("zh", &["a", "b"]), &inv("en", &[]));
        assert_eq!(v.num_phonemes(), 2);
        assert_eq!(v.entries()[0].symbol, "a");
    }

    #[test]
    fn special_ids_follow_the_phonemes() {
        let v = merge_vocabs(&inv("zh", &["a"]), &inv("en", &["b"]));
        assert_eq!(v.mask_id(), 2);
        assert_eq!(v.pad_id(), 3);
        assert_eq!(v.size(), 4);
    }

    #[test]
    fn encode_maps_ids_and_reports_unknown_symbols() {
        let v = merge_vocabs(&inv("zh", &["a", "b"]), &inv("en", &[]));
        let seq = v
            .encode_phonemes(&["a".to_string(), "b".to_string()])
            .unwrap();
        assert_eq!(seq.ids, vec![0, 1]);
        assert!(v.encode_phonemes(&[]).unwrap().is_empty());
        let err = v.encode_phonemes(&["z".to_string()]).unwrap_err();
        assert!(err.to_string().contains("'z'") && err.to_string().contains("position 0"));
    }

    #[test]
    fn decode_inverts_encode() {
        let v = merge_vocabs(&inv("zh", &["a", "b", "c"]), &inv("en", &["d"]));
        let symbols: Vec<String> = ["c", "a", "d"].iter().map(|s| s.to_string()).collect();
        let seq = v.encode_phonemes(&symbols).unwrap();
        assert_eq!(v.decode(&seq), symbols);
    }

    #[test]
    fn hash_changes_with_content_and_is_stable() {
        let v1 = merge_vocabs(&inv("zh", &["a", "b"]), &inv("en", &["c"]));
        let v2 = merge_vocabs(&inv("zh", &["a", "b"]), &inv("en", &["c"]));
        let v3 = merge_vocabs(&inv("zh", &["a", "b"]), &inv("en", &["d"]));
        assert_eq!(v1.hash(), v2.hash());
        assert_ne!(v1.hash(), v3.hash());
    }

    #[test]
    fn vocab_file_parses_symbols_and_language() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zh.vocab");
        std::fs::write(&path, "# comment\na\tzh\nb\tzh\nsil\tzh\n").unwrap();
        let inv = load_vocab_file(&path, "zh").unwrap();
        assert_eq!(inv.language, "zh");
        assert_eq!(inv.symbols, vec!["a", "b", "sil"]);
    }

    #[test]
    fn paper_scale_instance_merges_to_262() {
        // 193 + 73 with 4 shared symbols -> 262 cross-lingual phonemes.
        let zh: Vec<String> = (0..193).map(|i| format!("zh{i:03}")).collect();
        let mut en: Vec<String> = (0..69).map(|i| format!("en{i:03}")).collect();
        en.extend((0..4).map(|i| format!("zh{i:03}")));
        let v = merge_vocabs(
            &PhonemeInventory::new("zh", zh).unwrap(),
            &PhonemeInventory::new("en", en).unwrap(),
        );
        assert_eq!(v.num_phonemes(), 262);
    }
}
