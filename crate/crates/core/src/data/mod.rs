//! Sound-image data management: manifests, scene-disjoint splits, class
//! balancing, image preprocessing, the synthetic corpus generator, and an
//! in-memory split loader.

pub mod image_prep;
pub mod loader;
pub mod manifest;
pub mod splits;
pub mod synth;

pub use image_prep::{center_crop_resize, select_central_frame};
pub use loader::{class_names, epoch_order, image_batch, load_split, spec_batch, split_norm_stats, Sample};
pub use manifest::{read_manifest, write_manifest, SceneRecord, SegmentRef};
pub use splits::{balance_classes, balance_manifest, build_splits, SplitEntry, SplitManifest, SPLIT_NAMES};
pub use synth::{class_audio_template, class_image_template, class_tone, match_class_by_template, ncc, synth_dataset, SynthConfig};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Default sound classes at reference scale; synthetic corpora use
/// "class_{k}" labels instead.
pub const DEFAULT_REFERENCE_CLASSES: [&str; 5] =
    ["baby_cry", "dog", "fireworks", "rail_transport", "water_flowing"];

/// Fisher-Yates shuffle, pinned here so orderings never depend on rand's
/// internal shuffle implementation.
pub(crate) fn seeded_shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn shuffle_is_deterministic_per_seed() {
        let mut a: Vec<u32> = (0..20).collect();
        let mut b: Vec<u32> = (0..20).collect();
        seeded_shuffle(&mut a, &mut ChaCha8Rng::seed_from_u64(9));
        seeded_shuffle(&mut b, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let mut c: Vec<u32> = (0..20).collect();
        seeded_shuffle(&mut c, &mut ChaCha8Rng::seed_from_u64(10));
        assert_ne!(a, c);
    }

    #[test]
    fn shuffle_visits_every_position() {
        // with 300 shuffles of 0..6, every value appears at every index
        let mut seen = [[false; 6]; 6];
        for seed in 0..300 {
            let mut v: Vec<usize> = (0..6).collect();
            seeded_shuffle(&mut v, &mut ChaCha8Rng::seed_from_u64(seed));
            for (pos, &val) in v.iter().enumerate() {
                seen[pos][val] = true;
            }
        }
        assert!(seen.iter().flatten().all(|&x| x));
    }
}
