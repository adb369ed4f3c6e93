//! Batch-bin batching and the bilingual batch stream.

use super::derive_seed;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Greedy packing under a total-frame budget. Items are `(id, frames)`;
/// the result is batches of item indices. With a seed the order is shuffled
/// first; `None` keeps the given order (used by tests and resumable setups
/// that shuffle upstream).
pub fn make_batches(
    items: &[(String, usize)],
    batch_bins: usize,
    seed: Option<u64>,
) -> Result<Vec<Vec<usize>>> {
    for (id, frames) in items {
        if *frames > batch_bins {
            return Err(Error::Training(format!(
                "utterance '{id}' has {frames} frames, above the batch budget {batch_bins}"
            )));
        }
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut used = 0usize;
    for idx in order {
        let frames = items[idx].1;
        if !current.is_empty() && used + frames > batch_bins {
            batches.push(std::mem::take(&mut current));
            used = 0;
        }
        current.push(idx);
        used += frames;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

/// Monolingual-batch stream alternating between two languages.
///
/// The language for step `s` is a Bernoulli(p) draw hashed from
/// `(seed, s)`, so the stream is deterministic and a resumed run can fast-
/// forward without replaying data. Within a language, batches are consumed
/// in order, cycling when exhausted.
pub struct BilingualScheduler {
    languages: [String; 2],
    batches: [Vec<Vec<usize>>; 2],
    p: f64,
    seed: u64,
    counts: [u64; 2],
}

impl BilingualScheduler {
    pub fn new(
        languages: [String; 2],
        batches: [Vec<Vec<usize>>; 2],
        p: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Training(format!("language probability {p} outside [0, 1]")));
        }
        for (lang, b) in languages.iter().zip(batches.iter()) {
            if b.is_empty() {
                return Err(Error::Training(format!("no batches for language '{lang}'")));
            }
        }
        Ok(BilingualScheduler {
            languages,
            batches,
            p,
            seed,
            counts: [0, 0],
        })
    }

    /// Language index drawn for a 1-based step.
    pub fn language_for_step(&self, step: u64) -> usize {
        let h = derive_seed(&[self.seed, step, 0x1a6e]);
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        usize::from(u >= self.p)
    }

    /// Replay draws for steps `1..=step` to rebuild cursor state on resume.
    pub fn advance_to(&mut self, step: u64) {
        self.counts = [0, 0];
        for s in 1..=step {
            self.counts[self.language_for_step(s)] += 1;
        }
    }

    /// Batch for a 1-based step. Steps must be consumed in order.
    pub fn next(&mut self, step: u64) -> (&str, &[usize]) {
        let lang = self.language_for_step(step);
        let idx = (self.counts[lang] % self.batches[lang].len() as u64) as usize;
        self.counts[lang] += 1;
        (&self.languages[lang], &self.batches[lang][idx])
    }
}
