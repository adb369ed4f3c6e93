//! Data manifests, batch-bin batching, bilingual scheduling, the Noam
//! schedule and the pretraining loop.

mod adam;
mod batch;
mod data;
mod manifest;
mod schedule;
mod train;

pub use adam::{Adam, AdamConfig};
pub use batch::{make_batches, BilingualScheduler};
pub use data::{load_utterance, LoadedUtterance};
pub use manifest::{load_manifest, ManifestEntry};
pub use schedule::noam_lr;
pub use train::{
    run_pretraining, RunConfig, TrainConfig, TrainLogEntry, TrainOutcome,
};

/// Mix an arbitrary list of values into one RNG seed (splitmix64 core).
/// Per-utterance mask seeds and dropout seeds are derived this way so runs
/// are reproducible without correlated masks.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        let mut z = acc ^ p.wrapping_mul(0xff51_afd7_ed55_8ccd);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        acc = z ^ (z >> 31);
    }
    acc
}

/// FNV-1a of a string, for seeding from utterance ids.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
