//! Synthetic audiovisual corpus.
//!
//! Class k sounds like an amplitude-modulated tone (fundamental 400 + 300k
//! Hz, AM rate 2 + 3k Hz) in seeded noise, and looks like a class shape in a
//! class color on a textured background. Scene-level draws (frequency
//! detune, shape position/size, hue shift) are shared by the scene's
//! segments; segment-level draws (tone phase, noise, background texture,
//! 1-px wiggle) differ per segment. Pairing is therefore semantic by
//! construction: audio class and image class always agree.
//!
//! Per-scene RNGs are derived by hashing (seed, class, scene), so a corpus
//! is a pure function of its config.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::image_prep::center_crop_resize;
use crate::data::manifest::{write_manifest, SceneRecord, SegmentRef};
use crate::dsp::{log_mel_spectrogram, FrontendConfig, Spectrogram};
use crate::error::{S2iError, S2iResult};
use crate::io::checkpoint::fnv1a64;
use crate::io::png::save_rgb8;
use crate::io::wav::write_wav_mono;
use crate::nn::{Scalar, Tensor};

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub scenes_per_class: usize,
    pub segments_per_scene: usize,
    pub sample_rate: u32,
    pub segment_secs: f64,
    /// uniform noise amplitude added to the tone
    pub noise_level: f64,
    /// max shape-center offset from image center, pixels
    pub position_jitter: f64,
    /// max hue shift, degrees
    pub hue_jitter: f64,
    /// generated PNGs are square at this side
    pub render_size: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn tiny(seed: u64) -> Self {
        SynthConfig {
            n_classes: 2,
            scenes_per_class: 10,
            segments_per_scene: 3,
            sample_rate: 4000,
            segment_secs: 1.0,
            noise_level: 0.1,
            position_jitter: 5.0,
            hue_jitter: 18.0,
            render_size: 48,
            seed,
        }
    }

    pub fn validate(&self) -> S2iResult<()> {
        if self.n_classes < 1 || self.scenes_per_class < 1 || self.segments_per_scene < 1 {
            return Err(S2iError::Config("synth counts must be >= 1".into()));
        }
        if self.render_size < 8 {
            return Err(S2iError::Config("render_size must be >= 8".into()));
        }
        if !(self.noise_level >= 0.0) || self.segment_secs <= 0.0 {
            return Err(S2iError::Config("invalid noise level or segment length".into()));
        }
        let top = class_tone(self.n_classes - 1).0 * 1.03;
        let limit = 0.45 * self.sample_rate as f64;
        if top > limit {
            return Err(S2iError::Config(format!(
                "class {} tone {top:.0} Hz too close to Nyquist at {} Hz",
                self.n_classes - 1,
                self.sample_rate
            )));
        }
        Ok(())
    }

    pub fn samples_per_segment(&self) -> usize {
        (self.sample_rate as f64 * self.segment_secs).round() as usize
    }
}

/// (fundamental Hz, AM rate Hz) for class k.
pub fn class_tone(k: usize) -> (f64, f64) {
    (400.0 + 300.0 * k as f64, 2.0 + 3.0 * k as f64)
}

fn render_tone(sr: u32, n: usize, f_hz: f64, am_hz: f64, phase: f64) -> Vec<f64> {
    let dt = 1.0 / sr as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let env = 0.6 + 0.4 * (2.0 * PI * am_hz * t).sin();
            0.7 * env * (2.0 * PI * f_hz * t + phase).sin()
        })
        .collect()
}

fn hsv_to_rgb(h_deg: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h_deg.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

fn class_color(k: usize, n_classes: usize, hue_shift: f64) -> [u8; 3] {
    hsv_to_rgb(k as f64 * 360.0 / n_classes as f64 + hue_shift, 0.85, 0.9)
}

#[derive(Clone, Copy)]
enum Shape {
    Circle,
    Square,
    Triangle,
}

fn class_shape(k: usize) -> Shape {
    match k % 3 {
        0 => Shape::Circle,
        1 => Shape::Square,
        _ => Shape::Triangle,
    }
}

fn inside(shape: Shape, x: f64, y: f64, cx: f64, cy: f64, r: f64) -> bool {
    match shape {
        Shape::Circle => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
        Shape::Square => (x - cx).abs() <= r && (y - cy).abs() <= r,
        Shape::Triangle => {
            // vertices (cx, cy-r), (cx-r, cy+r), (cx+r, cy+r)
            let in_band = y >= cy - r && y <= cy + r;
            // width grows linearly from apex to base
            let half_w = r * (y - (cy - r)) / (2.0 * r);
            in_band && (x - cx).abs() <= half_w
        }
    }
}

const BG_BASE: u8 = 90;
const BG_SPAN: f64 = 25.0;

/// Renders one RGB frame. `texture` adds per-pixel background noise from the
/// rng; with `texture = false` the background is flat and the rng untouched.
fn render_image(
    size: usize,
    shape: Shape,
    color: [u8; 3],
    cx: f64,
    cy: f64,
    r: f64,
    texture: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let mut pixels = vec![0u8; size * size * 3];
    for y in 0..size {
        for x in 0..size {
            let bg = if texture {
                (BG_BASE as f64 + BG_SPAN * (2.0 * rng.random::<f64>() - 1.0))
                    .clamp(0.0, 255.0) as u8
            } else {
                BG_BASE
            };
            let px = if inside(shape, x as f64 + 0.5, y as f64 + 0.5, cx, cy, r) {
                color
            } else {
                [bg, bg, bg]
            };
            pixels[(y * size + x) * 3..][..3].copy_from_slice(&px);
        }
    }
    pixels
}

fn scene_rng(seed: u64, class: usize, scene: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a64(format!("{seed}/scene/{class}/{scene}").as_bytes()))
}

/// Writes wav/, img/ and manifest.jsonl under `out_dir`; returns the scenes.
pub fn synth_dataset(cfg: &SynthConfig, out_dir: &Path) -> S2iResult<Vec<SceneRecord>> {
    cfg.validate()?;
    let wav_dir = out_dir.join("wav");
    let img_dir = out_dir.join("img");
    fs::create_dir_all(&wav_dir).map_err(|e| S2iError::io(wav_dir.display().to_string(), e))?;
    fs::create_dir_all(&img_dir).map_err(|e| S2iError::io(img_dir.display().to_string(), e))?;

    let n = cfg.samples_per_segment();
    let size = cfg.render_size;
    let mut scenes = Vec::new();
    for k in 0..cfg.n_classes {
        let (f_hz, am_hz) = class_tone(k);
        let shape = class_shape(k);
        for i in 0..cfg.scenes_per_class {
            let mut rng = scene_rng(cfg.seed, k, i);
            let detune = 1.0 + 0.02 * (2.0 * rng.random::<f64>() - 1.0);
            let am_detune = 1.0 + 0.02 * (2.0 * rng.random::<f64>() - 1.0);
            let cx = size as f64 / 2.0 + cfg.position_jitter * (2.0 * rng.random::<f64>() - 1.0);
            let cy = size as f64 / 2.0 + cfg.position_jitter * (2.0 * rng.random::<f64>() - 1.0);
            let r = size as f64 * 0.25 * (0.9 + 0.2 * rng.random::<f64>());
            let hue_shift = cfg.hue_jitter * (2.0 * rng.random::<f64>() - 1.0);
            let color = class_color(k, cfg.n_classes, hue_shift);

            let scene_id = format!("{:08x}-c{k:02}-{i:04}", cfg.seed);
            let mut segments = Vec::new();
            for s in 0..cfg.segments_per_scene {
                let phase = 2.0 * PI * rng.random::<f64>();
                let mut samples = render_tone(cfg.sample_rate, n, f_hz * detune, am_hz * am_detune, phase);
                if cfg.noise_level > 0.0 {
                    for v in samples.iter_mut() {
                        *v += cfg.noise_level * (2.0 * rng.random::<f64>() - 1.0);
                    }
                }
                for v in samples.iter_mut() {
                    *v = v.clamp(-1.0, 1.0);
                }
                let wav_name = format!("{scene_id}_{s:02}.wav");
                write_wav_mono(&wav_dir.join(&wav_name), &samples, cfg.sample_rate)?;

                let wx = rng.random_range(-1i64..=1) as f64;
                let wy = rng.random_range(-1i64..=1) as f64;
                let pixels = render_image(size, shape, color, cx + wx, cy + wy, r, true, &mut rng);
                let img_name = format!("{scene_id}_{s:02}.png");
                save_rgb8(&img_dir.join(&img_name), size as u32, size as u32, &pixels)?;

                segments.push(SegmentRef {
                    segment_index: s,
                    audio_path: format!("wav/{wav_name}"),
                    image_path: format!("img/{img_name}"),
                });
            }
            scenes.push(SceneRecord {
                scene_id,
                class_label: format!("class_{k}"),
                segments,
            });
        }
    }
    write_manifest(&out_dir.join("manifest.jsonl"), &scenes)?;
    Ok(scenes)
}

/// Log-mel spectrogram of class k's clean tone: no detune, no noise, phase 0.
pub fn class_audio_template(cfg: &SynthConfig, dsp: &FrontendConfig, k: usize) -> S2iResult<Spectrogram> {
    let (f_hz, am_hz) = class_tone(k);
    let samples = render_tone(cfg.sample_rate, cfg.samples_per_segment(), f_hz, am_hz, 0.0);
    log_mel_spectrogram(&samples, dsp)
}

/// Class k's clean image at `target` resolution: centered shape, flat
/// background, no jitter.
pub fn class_image_template<F: Scalar>(
    cfg: &SynthConfig,
    k: usize,
    target: usize,
) -> S2iResult<Tensor<F>> {
    let size = cfg.render_size;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pixels = render_image(
        size,
        class_shape(k),
        class_color(k, cfg.n_classes, 0.0),
        size as f64 / 2.0,
        size as f64 / 2.0,
        size as f64 * 0.25,
        false,
        &mut rng,
    );
    center_crop_resize(size, size, &pixels, target)
}

/// Normalized cross-correlation between two equal-shape value slices.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        dot += dx * dy;
        na += dx * dx;
        nb += dy * dy;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb).sqrt()
}

/// Index of the best-matching template by normalized cross-correlation.
pub fn match_class_by_template(spec: &Spectrogram, templates: &[Spectrogram]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, t) in templates.iter().enumerate() {
        let score = ncc(&spec.data, &t.data);
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}
