//! Scene manifests: JSON-lines, one scene per line.
//!
//! A scene groups the segments cut from one source video; segments carry
//! both modalities. Iteration order is always sorted by (scene_id,
//! segment_index) so downstream consumers see a stable order regardless of
//! file order.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{S2iError, S2iResult};

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SegmentRef {
    pub segment_index: usize,
    pub audio_path: String,
    pub image_path: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub class_label: String,
    pub segments: Vec<SegmentRef>,
}

fn validate(scenes: &[SceneRecord], path: &str) -> S2iResult<()> {
    let mut seen = BTreeSet::new();
    for s in scenes {
        if !seen.insert(&s.scene_id) {
            return Err(S2iError::format(path, format!("duplicate scene_id {}", s.scene_id)));
        }
        if s.segments.is_empty() {
            return Err(S2iError::format(path, format!("scene {} has no segments", s.scene_id)));
        }
        if s.audio_pathless_segment() {
            return Err(S2iError::format(
                path,
                format!("scene {} has a segment missing a modality path", s.scene_id),
            ));
        }
    }
    Ok(())
}

impl SceneRecord {
    fn audio_pathless_segment(&self) -> bool {
        self.segments
            .iter()
            .any(|g| g.audio_path.is_empty() || g.image_path.is_empty())
    }
}

fn sort_scenes(scenes: &mut [SceneRecord]) {
    for s in scenes.iter_mut() {
        s.segments.sort_by_key(|g| g.segment_index);
    }
    scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
}

pub fn write_manifest(path: &Path, scenes: &[SceneRecord]) -> S2iResult<()> {
    let mut sorted = scenes.to_vec();
    sort_scenes(&mut sorted);
    validate(&sorted, &path.display().to_string())?;
    let mut out = String::new();
    for s in &sorted {
        out.push_str(&serde_json::to_string(s).expect("scene serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| S2iError::io(path.display().to_string(), e))
}

pub fn read_manifest(path: &Path) -> S2iResult<Vec<SceneRecord>> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| S2iError::io(p.clone(), e))?;
    let mut scenes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: SceneRecord = serde_json::from_str(line)
            .map_err(|e| S2iError::format(p.clone(), format!("line {}: {e}", i + 1)))?;
        scenes.push(s);
    }
    sort_scenes(&mut scenes);
    validate(&scenes, &p)?;
    Ok(scenes)
}
