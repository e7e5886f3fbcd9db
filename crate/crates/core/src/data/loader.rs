//! Split materialization: WAV -> normalized log-mel tensor, PNG -> cropped
//! image tensor, plus batch assembly. Corpora at test scale fit in memory,
//! so a split loads eagerly in manifest order.

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::data::image_prep::center_crop_resize;
use crate::data::seeded_shuffle;
use crate::data::splits::SplitManifest;
use crate::dsp::{compute_norm_stats, log_mel_spectrogram, normalize_spectrogram, FrontendConfig, NormStats, Spectrogram};
use crate::error::{S2iError, S2iResult};
use crate::io::png::load_rgb8;
use crate::io::wav::read_wav_mono;
use crate::nn::{Scalar, Tensor};

pub struct Sample<F> {
    pub scene_id: String,
    pub class_idx: usize,
    /// normalized log-mel, [rows, cols]
    pub spec: Tensor<F>,
    /// [3, target, target] in [-1, 1]
    pub image: Tensor<F>,
}

/// Sorted distinct class labels across the given splits.
pub fn class_names(splits: &[&SplitManifest]) -> Vec<String> {
    let mut names: Vec<String> = splits
        .iter()
        .flat_map(|m| m.entries.iter().map(|e| e.class_label.clone()))
        .collect();
    names.sort();
    names.dedup();
    names
}

fn split_spectrograms(
    split: &SplitManifest,
    root: &Path,
    dsp: &FrontendConfig,
) -> S2iResult<Vec<Spectrogram>> {
    let mut specs = Vec::new();
    for entry in &split.entries {
        for seg in &entry.segments {
            let (samples, sr) = read_wav_mono(&root.join(&seg.audio_path))?;
            if sr != dsp.sample_rate {
                return Err(S2iError::Data(format!(
                    "{}: sample rate {sr} != configured {}",
                    seg.audio_path, dsp.sample_rate
                )));
            }
            specs.push(log_mel_spectrogram(&samples, dsp)?);
        }
    }
    Ok(specs)
}

/// Global min-max over every spectrogram of the split (the training split
/// defines the stats the other splits reuse).
pub fn split_norm_stats(
    split: &SplitManifest,
    root: &Path,
    dsp: &FrontendConfig,
) -> S2iResult<NormStats> {
    compute_norm_stats(&split_spectrograms(split, root, dsp)?)
}

pub fn load_split<F: Scalar>(
    split: &SplitManifest,
    root: &Path,
    dsp: &FrontendConfig,
    stats: NormStats,
    image_target: usize,
    classes: &[String],
) -> S2iResult<Vec<Sample<F>>> {
    let mut samples = Vec::new();
    for entry in &split.entries {
        let class_idx = classes
            .iter()
            .position(|c| *c == entry.class_label)
            .ok_or_else(|| {
                S2iError::Data(format!("class {} missing from class list", entry.class_label))
            })?;
        for seg in &entry.segments {
            let (wav, sr) = read_wav_mono(&root.join(&seg.audio_path))?;
            if sr != dsp.sample_rate {
                return Err(S2iError::Data(format!(
                    "{}: sample rate {sr} != configured {}",
                    seg.audio_path, dsp.sample_rate
                )));
            }
            let raw = log_mel_spectrogram(&wav, dsp)?;
            let (norm, _) = normalize_spectrogram(&raw, stats);
            let spec = Tensor::from_vec(
                &[norm.rows, norm.cols],
                norm.data.iter().map(|&v| F::from_f64(v)).collect(),
            )?;
            let (w, h, pixels) = load_rgb8(&root.join(&seg.image_path))?;
            let image = center_crop_resize(w as usize, h as usize, &pixels, image_target)?;
            samples.push(Sample {
                scene_id: entry.scene_id.clone(),
                class_idx,
                spec,
                image,
            });
        }
    }
    Ok(samples)
}

/// Seeded permutation of 0..n for one epoch's batch order.
pub fn epoch_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    seeded_shuffle(&mut order, rng);
    order
}

/// Stacks selected spectrograms into [b, 1, rows, cols].
pub fn spec_batch<F: Scalar>(samples: &[Sample<F>], idxs: &[usize]) -> Tensor<F> {
    let dims = samples[idxs[0]].spec.dims();
    let (rows, cols) = (dims[0], dims[1]);
    let mut out = Tensor::zeros(&[idxs.len(), 1, rows, cols]);
    let n = rows * cols;
    for (slot, &i) in idxs.iter().enumerate() {
        out.data_mut()[slot * n..(slot + 1) * n].copy_from_slice(samples[i].spec.data());
    }
    out
}

/// Stacks selected images into [b, 3, t, t].
pub fn image_batch<F: Scalar>(samples: &[Sample<F>], idxs: &[usize]) -> Tensor<F> {
    let dims = samples[idxs[0]].image.dims().to_vec();
    let n: usize = dims.iter().product();
    let mut out = Tensor::zeros(&[idxs.len(), dims[0], dims[1], dims[2]]);
    for (slot, &i) in idxs.iter().enumerate() {
        out.data_mut()[slot * n..(slot + 1) * n].copy_from_slice(samples[i].image.data());
    }
    out
}
