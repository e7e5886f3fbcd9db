//! Scene-disjoint train/val/test splits.
//!
//! A scene's segments all land in one split, so no sound from a known scene
//! can leak into evaluation. Assignment is per class: segment-count targets
//! follow the requested ratios (largest-remainder apportionment), each
//! nonzero split is first guaranteed one scene, then scenes go greedily to
//! the split with the largest remaining deficit.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::data::manifest::{SceneRecord, SegmentRef};
use crate::data::seeded_shuffle;
use crate::error::{S2iError, S2iResult};

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Clone, Debug, PartialEq)]
pub struct SplitEntry {
    pub scene_id: String,
    pub class_label: String,
    pub segments: Vec<SegmentRef>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitManifest {
    pub name: String,
    pub entries: Vec<SplitEntry>,
}

impl SplitManifest {
    pub fn segment_count(&self) -> usize {
        self.entries.iter().map(|e| e.segments.len()).sum()
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.class_label.clone()).or_insert(0) += e.segments.len();
        }
        counts
    }
}

/// Largest-remainder apportionment of `total` items by `ratios`.
fn apportion(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let mut base = [0usize; 3];
    let mut rem: Vec<(usize, f64)> = Vec::new();
    let mut assigned = 0usize;
    for i in 0..3 {
        let exact = ratios[i] * total as f64;
        base[i] = exact.floor() as usize;
        assigned += base[i];
        rem.push((i, exact - exact.floor()));
    }
    rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in rem.iter().take(total - assigned) {
        base[i] += 1;
    }
    base
}

pub fn build_splits(
    scenes: &[SceneRecord],
    ratios: [f64; 3],
    seed: u64,
) -> S2iResult<[SplitManifest; 3]> {
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(S2iError::Config(format!(
            "split ratios {ratios:?} must be nonnegative and sum to 1"
        )));
    }
    if ratios[0] == 0.0 {
        return Err(S2iError::Config("train ratio must be positive".into()));
    }
    let nonzero: Vec<usize> = (0..3).filter(|&i| ratios[i] > 0.0).collect();

    let mut by_class: BTreeMap<&str, Vec<&SceneRecord>> = BTreeMap::new();
    for s in scenes {
        by_class.entry(&s.class_label).or_default().push(s);
    }

    let mut deficits = Vec::new();
    for (class, list) in &by_class {
        if list.len() < nonzero.len() {
            deficits.push(format!(
                "class {class}: {} scenes, need at least {}",
                list.len(),
                nonzero.len()
            ));
        }
    }
    if !deficits.is_empty() {
        return Err(S2iError::Data(format!(
            "insufficient scenes for scene-disjoint splits: {}",
            deficits.join("; ")
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits: [Vec<SplitEntry>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (_, list) in by_class.iter_mut() {
        list.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        seeded_shuffle(list, &mut rng);
        let total: usize = list.iter().map(|s| s.segments.len()).sum();
        let targets = apportion(total, &ratios);
        let mut assigned = [0usize; 3];
        let mut have_scene = [false; 3];
        for scene in list.iter() {
            // guarantee presence first, largest target first
            let forced = nonzero
                .iter()
                .copied()
                .filter(|&i| !have_scene[i])
                .max_by(|&a, &b| {
                    targets[a].cmp(&targets[b]).then(b.cmp(&a))
                });
            let dest = match forced {
                Some(i) => i,
                None => {
                    // largest remaining deficit, ties to the earlier split
                    let mut best = nonzero[0];
                    let mut best_deficit = i64::MIN;
                    for &i in &nonzero {
                        let d = targets[i] as i64 - assigned[i] as i64;
                        if d > best_deficit {
                            best = i;
                            best_deficit = d;
                        }
                    }
                    best
                }
            };
            assigned[dest] += scene.segments.len();
            have_scene[dest] = true;
            splits[dest].push(SplitEntry {
                scene_id: scene.scene_id.clone(),
                class_label: scene.class_label.clone(),
                segments: scene.segments.clone(),
            });
        }
    }

    Ok(core::array::from_fn(|i| {
        let mut entries = std::mem::take(&mut splits[i]);
        entries.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        SplitManifest {
            name: SPLIT_NAMES[i].to_string(),
            entries,
        }
    }))
}

/// Truncates every class to the minimum class count with a seeded uniform
/// subset; survivors keep their original relative order.
pub fn balance_classes<T: Clone>(
    per_class: &[(String, Vec<T>)],
    seed: u64,
) -> S2iResult<Vec<(String, Vec<T>)>> {
    for (class, items) in per_class {
        if items.is_empty() {
            return Err(S2iError::Data(format!("class {class} has no segments")));
        }
    }
    let m = per_class.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(per_class
        .iter()
        .map(|(class, items)| {
            let kept = if items.len() == m {
                items.clone()
            } else {
                let mut idx: Vec<usize> = (0..items.len()).collect();
                seeded_shuffle(&mut idx, &mut rng);
                idx.truncate(m);
                idx.sort_unstable();
                idx.into_iter().map(|i| items[i].clone()).collect()
            };
            (class.clone(), kept)
        })
        .collect())
}

/// Balances a split manifest so every class contributes the same number of
/// segments, dropping scenes that lose all segments.
pub fn balance_manifest(split: &SplitManifest, seed: u64) -> S2iResult<SplitManifest> {
    let mut per_class: BTreeMap<String, Vec<(String, SegmentRef)>> = BTreeMap::new();
    for e in &split.entries {
        let bucket = per_class.entry(e.class_label.clone()).or_default();
        for g in &e.segments {
            bucket.push((e.scene_id.clone(), g.clone()));
        }
    }
    let listed: Vec<(String, Vec<(String, SegmentRef)>)> = per_class.into_iter().collect();
    let balanced = balance_classes(&listed, seed)?;

    let class_of: BTreeMap<&str, &str> = split
        .entries
        .iter()
        .map(|e| (e.scene_id.as_str(), e.class_label.as_str()))
        .collect();
    let mut by_scene: BTreeMap<String, Vec<SegmentRef>> = BTreeMap::new();
    for (_, items) in balanced {
        for (scene_id, seg) in items {
            by_scene.entry(scene_id).or_default().push(seg);
        }
    }
    let entries = by_scene
        .into_iter()
        .map(|(scene_id, mut segments)| {
            segments.sort_by_key(|g| g.segment_index);
            let class_label = class_of[scene_id.as_str()].to_string();
            SplitEntry { scene_id, class_label, segments }
        })
        .collect();
    Ok(SplitManifest {
        name: split.name.clone(),
        entries,
    })
}
