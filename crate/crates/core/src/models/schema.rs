//! Declarative network layouts.
//!
//! A schema is data: per-network layer lists generated from a profile, the
//! embedding dimension f, and a couple of knobs (inner activation for the
//! ablation study, dropout probability). Builders consume the lists, so the
//! serialized schema and the constructed network cannot drift apart. The
//! canonical JSON form is hashed into checkpoints.

use serde::{Deserialize, Serialize};

use crate::error::{S2iError, S2iResult};
use crate::nn::Activation;

/// Batch-norm running-stats momentum: new = m * old + (1 - m) * batch.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Reference,
    Tiny,
}

impl Profile {
    /// Valid embedding dimensions, smallest first.
    pub fn f_sweep(self) -> &'static [usize] {
        match self {
            Profile::Reference => &[128, 256, 512, 1024, 2048],
            Profile::Tiny => &[8, 16, 32],
        }
    }

    /// Spectrogram (rows, cols) = (frames, mel bands).
    pub fn spectrogram_shape(self) -> (usize, usize) {
        match self {
            Profile::Reference => (100, 128),
            Profile::Tiny => (20, 32),
        }
    }

    pub fn image_size(self) -> usize {
        match self {
            Profile::Reference => 96,
            Profile::Tiny => 24,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct SchemaOptions {
    /// Activation for every inner layer of autoencoder, generator and
    /// discriminator (heads stay TanH, classifier stays ReLU).
    pub inner_act: Activation,
    pub dropout_p: f64,
}

impl Default for SchemaOptions {
    fn default() -> Self {
        SchemaOptions {
            inner_act: Activation::Relu,
            dropout_p: 0.5,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerDesc {
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Upsample {
        out_h: usize,
        out_w: usize,
    },
    FullyConnected {
        in_units: usize,
        out_units: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Activation {
        act: Activation,
    },
    Dropout {
        p: f64,
        eval_active: bool,
    },
    Reshape {
        per_sample: Vec<usize>,
    },
    /// `units` growth convs with concat skips; `head_out` adds a final conv
    /// over the full concatenation (TanH, no batch norm).
    DenseBlock {
        in_ch: usize,
        growth: usize,
        units: usize,
        head_out: Option<usize>,
        act: Activation,
    },
}

impl LayerDesc {
    /// Convolutional layers this descriptor contributes.
    pub fn conv_count(&self) -> usize {
        match self {
            LayerDesc::Conv2d { .. } => 1,
            LayerDesc::DenseBlock { units, head_out, .. } => {
                units + usize::from(head_out.is_some())
            }
            _ => 0,
        }
    }
}

pub fn conv_count(descs: &[LayerDesc]) -> usize {
    descs.iter().map(LayerDesc::conv_count).sum()
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ModelSchema {
    pub profile: Profile,
    pub f: usize,
    pub options: SchemaOptions,
    pub audio_encoder: Vec<LayerDesc>,
    pub audio_decoder: Vec<LayerDesc>,
    pub generator: Vec<LayerDesc>,
    pub disc_trunk: Vec<LayerDesc>,
    pub disc_head: Vec<LayerDesc>,
    pub classifier: Vec<LayerDesc>,
}

/// Strided 3x3 conv ladder with BN + activation, optionally interleaved with
/// a stride-1 conv per stage. Shared by the audio encoder and the
/// discriminator trunk.
fn strided_stack(
    descs: &mut Vec<LayerDesc>,
    mut cur: usize,
    ladder: &[usize],
    interleave: bool,
    act: Activation,
) -> usize {
    for &out in ladder {
        descs.push(LayerDesc::Conv2d {
            in_ch: cur,
            out_ch: out,
            kernel: 3,
            stride: 2,
            padding: 1,
        });
        descs.push(LayerDesc::BatchNorm { channels: out });
        descs.push(LayerDesc::Activation { act });
        if interleave {
            descs.push(LayerDesc::Conv2d {
                in_ch: out,
                out_ch: out,
                kernel: 3,
                stride: 1,
                padding: 1,
            });
            descs.push(LayerDesc::BatchNorm { channels: out });
            descs.push(LayerDesc::Activation { act });
        }
        cur = out;
    }
    cur
}

fn encoder_descs(profile: Profile, f: usize, act: Activation) -> Vec<LayerDesc> {
    let (ladder, interleave): (&[usize], bool) = match profile {
        Profile::Reference => (&[16, 32, 64, 128, 256, 512], true),
        Profile::Tiny => (&[8, 16, 32, 64], false),
    };
    let mut descs = Vec::new();
    let cur = strided_stack(&mut descs, 1, ladder, interleave, act);
    // head: strided conv to a 1x1 map, TanH, no batch norm
    descs.push(LayerDesc::Conv2d {
        in_ch: cur,
        out_ch: f,
        kernel: 3,
        stride: 2,
        padding: 1,
    });
    descs.push(LayerDesc::Activation { act: Activation::Tanh });
    descs.push(LayerDesc::Reshape { per_sample: vec![f] });
    descs
}

fn decoder_descs(profile: Profile, f: usize, act: Activation, p: f64) -> Vec<LayerDesc> {
    // (out_h, out_w, out_ch) per upsample stage, mirroring the encoder path
    let (stages, interleave): (&[(usize, usize, usize)], bool) = match profile {
        Profile::Reference => (
            &[
                (2, 2, 512),
                (4, 4, 256),
                (7, 8, 128),
                (13, 16, 64),
                (25, 32, 32),
                (50, 64, 16),
                (100, 128, 1),
            ],
            true,
        ),
        Profile::Tiny => (
            &[(2, 2, 64), (3, 4, 32), (5, 8, 16), (10, 16, 8), (20, 32, 1)],
            false,
        ),
    };
    let mut descs = vec![LayerDesc::Reshape { per_sample: vec![f, 1, 1] }];
    let mut cur = f;
    let last = stages.len() - 1;
    for (i, &(h, w, out)) in stages.iter().enumerate() {
        descs.push(LayerDesc::Upsample { out_h: h, out_w: w });
        descs.push(LayerDesc::Conv2d {
            in_ch: cur,
            out_ch: out,
            kernel: 3,
            stride: 1,
            padding: 1,
        });
        if i == last {
            descs.push(LayerDesc::Activation { act: Activation::Tanh });
        } else {
            descs.push(LayerDesc::BatchNorm { channels: out });
            descs.push(LayerDesc::Activation { act });
            descs.push(LayerDesc::Dropout { p, eval_active: false });
            if interleave {
                descs.push(LayerDesc::Conv2d {
                    in_ch: out,
                    out_ch: out,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                });
                descs.push(LayerDesc::BatchNorm { channels: out });
                descs.push(LayerDesc::Activation { act });
                descs.push(LayerDesc::Dropout { p, eval_active: false });
            }
        }
        cur = out;
    }
    descs
}

fn generator_descs(profile: Profile, f: usize, act: Activation, p: f64) -> Vec<LayerDesc> {
    // (stem channels, growth, per-block units, spatial sizes)
    let (stem, growth, block_units, sizes): (usize, usize, &[usize], &[usize]) = match profile {
        Profile::Reference => (64, 16, &[4, 4, 4, 4, 4, 3], &[3, 6, 12, 24, 48, 96]),
        Profile::Tiny => (16, 8, &[2, 2, 2, 1], &[3, 6, 12, 24]),
    };
    let mut descs = vec![
        LayerDesc::Reshape { per_sample: vec![f, 1, 1] },
        LayerDesc::Upsample { out_h: sizes[0], out_w: sizes[0] },
        LayerDesc::Conv2d {
            in_ch: f,
            out_ch: stem,
            kernel: 3,
            stride: 1,
            padding: 1,
        },
        LayerDesc::BatchNorm { channels: stem },
        LayerDesc::Activation { act },
    ];
    let mut cur = stem;
    let last = block_units.len() - 1;
    for (i, &units) in block_units.iter().enumerate() {
        let head_out = (i == last).then_some(3);
        descs.push(LayerDesc::DenseBlock {
            in_ch: cur,
            growth,
            units,
            head_out,
            act,
        });
        cur += units * growth;
        if i < last {
            descs.push(LayerDesc::Upsample {
                out_h: sizes[i + 1],
                out_w: sizes[i + 1],
            });
            descs.push(LayerDesc::Dropout { p, eval_active: true });
        }
    }
    descs
}

fn disc_trunk_descs(profile: Profile, act: Activation) -> Vec<LayerDesc> {
    let (ladder, interleave): (&[usize], bool) = match profile {
        Profile::Reference => (&[16, 32, 64, 128, 256, 512], true),
        Profile::Tiny => (&[8, 16, 32, 64], false),
    };
    let mut descs = Vec::new();
    strided_stack(&mut descs, 3, ladder, interleave, act);
    descs
}

fn disc_head_descs(profile: Profile, f: usize, p: f64) -> Vec<LayerDesc> {
    let trunk_out = match profile {
        Profile::Reference => 512,
        Profile::Tiny => 64,
    };
    vec![
        LayerDesc::Dropout { p, eval_active: false },
        LayerDesc::Conv2d {
            in_ch: trunk_out + f,
            out_ch: 1,
            kernel: 3,
            stride: 2,
            padding: 1,
        },
        LayerDesc::Activation { act: Activation::Tanh },
        LayerDesc::Reshape { per_sample: vec![1] },
    ]
}

fn classifier_descs(profile: Profile, p: f64) -> Vec<LayerDesc> {
    let (ladder, flat, hidden): (&[usize], usize, usize) = match profile {
        Profile::Reference => (&[16, 32, 64, 128, 256], 256 * 3 * 3, 128),
        Profile::Tiny => (&[8, 16, 32, 32, 32], 32, 16),
    };
    let mut descs = Vec::new();
    let mut cur = 3;
    for &out in ladder {
        descs.push(LayerDesc::Conv2d {
            in_ch: cur,
            out_ch: out,
            kernel: 3,
            stride: 2,
            padding: 1,
        });
        descs.push(LayerDesc::BatchNorm { channels: out });
        descs.push(LayerDesc::Activation { act: Activation::Relu });
        descs.push(LayerDesc::Dropout { p, eval_active: false });
        cur = out;
    }
    descs.push(LayerDesc::Reshape { per_sample: vec![flat] });
    descs.push(LayerDesc::FullyConnected { in_units: flat, out_units: hidden });
    descs.push(LayerDesc::BatchNorm { channels: hidden });
    descs.push(LayerDesc::Activation { act: Activation::Relu });
    descs.push(LayerDesc::Dropout { p, eval_active: false });
    descs.push(LayerDesc::FullyConnected { in_units: hidden, out_units: 2 });
    descs.push(LayerDesc::Activation { act: Activation::SoftmaxLog });
    descs
}

impl ModelSchema {
    pub fn new(profile: Profile, f: usize, options: SchemaOptions) -> S2iResult<Self> {
        if !profile.f_sweep().contains(&f) {
            return Err(S2iError::Config(format!(
                "embedding dim {f} not in {:?} for {profile:?}",
                profile.f_sweep()
            )));
        }
        if !(0.0..1.0).contains(&options.dropout_p) {
            return Err(S2iError::Config(format!(
                "dropout p {} outside [0, 1)",
                options.dropout_p
            )));
        }
        let act = options.inner_act;
        let p = options.dropout_p;
        Ok(ModelSchema {
            profile,
            f,
            options,
            audio_encoder: encoder_descs(profile, f, act),
            audio_decoder: decoder_descs(profile, f, act, p),
            generator: generator_descs(profile, f, act, p),
            disc_trunk: disc_trunk_descs(profile, act),
            disc_head: disc_head_descs(profile, f, p),
            classifier: classifier_descs(profile, p),
        })
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("schema serializes")
    }

    pub fn from_json(json: &str) -> S2iResult<Self> {
        serde_json::from_str(json)
            .map_err(|e| S2iError::Config(format!("schema json: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_conv_counts_match_design() {
        let s = ModelSchema::new(Profile::Reference, 128, SchemaOptions::default()).unwrap();
        assert_eq!(conv_count(&s.audio_encoder), 13);
        assert_eq!(conv_count(&s.audio_decoder), 13);
        assert_eq!(conv_count(&s.generator), 25);
        assert_eq!(conv_count(&s.disc_trunk) + conv_count(&s.disc_head), 13);
        assert_eq!(conv_count(&s.classifier), 5);
    }

    #[test]
    fn tiny_conv_counts_match_design() {
        let s = ModelSchema::new(Profile::Tiny, 16, SchemaOptions::default()).unwrap();
        assert_eq!(conv_count(&s.audio_encoder), 5);
        assert_eq!(conv_count(&s.audio_decoder), 5);
        assert_eq!(conv_count(&s.generator), 9);
        assert_eq!(conv_count(&s.disc_trunk) + conv_count(&s.disc_head), 5);
        assert_eq!(conv_count(&s.classifier), 5);
    }

    #[test]
    fn embedding_dim_outside_sweep_is_rejected() {
        assert!(ModelSchema::new(Profile::Reference, 100, SchemaOptions::default()).is_err());
        assert!(ModelSchema::new(Profile::Tiny, 128, SchemaOptions::default()).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let s = ModelSchema::new(Profile::Tiny, 8, SchemaOptions::default()).unwrap();
        let json = s.canonical_json();
        let back = ModelSchema::from_json(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.canonical_json(), json);
    }

    #[test]
    fn generator_dropout_is_eval_active_decoder_is_not() {
        let s = ModelSchema::new(Profile::Tiny, 16, SchemaOptions::default()).unwrap();
        let gen_drops: Vec<bool> = s
            .generator
            .iter()
            .filter_map(|d| match d {
                LayerDesc::Dropout { eval_active, .. } => Some(*eval_active),
                _ => None,
            })
            .collect();
        assert!(!gen_drops.is_empty() && gen_drops.iter().all(|&e| e));
        let dec_drops: Vec<bool> = s
            .audio_decoder
            .iter()
            .filter_map(|d| match d {
                LayerDesc::Dropout { eval_active, .. } => Some(*eval_active),
                _ => None,
            })
            .collect();
        assert!(!dec_drops.is_empty() && dec_drops.iter().all(|&e| !e));
    }

    #[test]
    fn dense_block_channel_ladder_is_consistent() {
        for profile in [Profile::Reference, Profile::Tiny] {
            let f = profile.f_sweep()[0];
            let s = ModelSchema::new(profile, f, SchemaOptions::default()).unwrap();
            let mut expected_in = None;
            for d in &s.generator {
                match d {
                    LayerDesc::Conv2d { out_ch, .. } => expected_in = Some(*out_ch),
                    LayerDesc::DenseBlock { in_ch, growth, units, .. } => {
                        assert_eq!(Some(*in_ch), expected_in);
                        expected_in = Some(in_ch + growth * units);
                    }
                    _ => {}
                }
            }
        }
    }
}
