//! Network construction from schema descriptors.
//!
//! Weight tensors are Xavier-initialized from the shared init stream in
//! descriptor order, so a (seed, schema) pair fully determines every
//! parameter byte. Draws happen at f64 regardless of the network's scalar
//! type to keep f32 and f64 instantiations stream-compatible.

use rand_chacha::ChaCha8Rng;

use crate::error::S2iResult;
use crate::models::schema::{LayerDesc, ModelSchema, BN_MOMENTUM};
use crate::nn::layer::{
    ActLayer, Activation, BatchNorm, Conv2d, DenseBlock, DropoutLayer, FullyConnected, Layer,
    Reshape, Upsample,
};
use crate::nn::{xavier_uniform, Network, Scalar};

fn init_conv<F: Scalar>(conv: &mut Conv2d<F>, rng: &mut ChaCha8Rng) {
    let (kh, kw) = conv.kernel;
    let (fan_in, fan_out) = (conv.in_ch * kh * kw, conv.out_ch * kh * kw);
    xavier_uniform(&mut conv.w, fan_in, fan_out, rng);
}

fn init_fc<F: Scalar>(fc: &mut FullyConnected<F>, rng: &mut ChaCha8Rng) {
    let (fan_in, fan_out) = (fc.in_units, fc.out_units);
    xavier_uniform(&mut fc.w, fan_in, fan_out, rng);
}

fn growth_unit<F: Scalar>(
    in_ch: usize,
    growth: usize,
    act: Activation,
    rng: &mut ChaCha8Rng,
) -> Vec<Layer<F>> {
    let mut conv = Conv2d::new(in_ch, growth, (3, 3), (1, 1), (1, 1));
    init_conv(&mut conv, rng);
    vec![
        Layer::Conv2d(conv),
        Layer::BatchNorm(BatchNorm::new(growth, BN_MOMENTUM)),
        Layer::Act(ActLayer::new(act)),
    ]
}

pub fn build_network<F: Scalar>(
    name: &str,
    descs: &[LayerDesc],
    rng: &mut ChaCha8Rng,
) -> S2iResult<Network<F>> {
    let mut net = Network::new(name);
    for (i, desc) in descs.iter().enumerate() {
        match desc {
            LayerDesc::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
                let mut conv = Conv2d::new(
                    *in_ch,
                    *out_ch,
                    (*kernel, *kernel),
                    (*stride, *stride),
                    (*padding, *padding),
                );
                init_conv(&mut conv, rng);
                net.push(format!("{i:02}_conv"), Layer::Conv2d(conv));
            }
            LayerDesc::Upsample { out_h, out_w } => {
                net.push(format!("{i:02}_up"), Layer::Upsample(Upsample::new(*out_h, *out_w)));
            }
            LayerDesc::FullyConnected { in_units, out_units } => {
                let mut fc = FullyConnected::new(*in_units, *out_units);
                init_fc(&mut fc, rng);
                net.push(format!("{i:02}_fc"), Layer::FullyConnected(fc));
            }
            LayerDesc::BatchNorm { channels } => {
                net.push(
                    format!("{i:02}_bn"),
                    Layer::BatchNorm(BatchNorm::new(*channels, BN_MOMENTUM)),
                );
            }
            LayerDesc::Activation { act } => {
                net.push(format!("{i:02}_act"), Layer::Act(ActLayer::new(*act)));
            }
            LayerDesc::Dropout { p, eval_active } => {
                net.push(
                    format!("{i:02}_drop"),
                    Layer::Dropout(DropoutLayer::new(*p, *eval_active)),
                );
            }
            LayerDesc::Reshape { per_sample } => {
                net.push(format!("{i:02}_reshape"), Layer::Reshape(Reshape::new(per_sample)));
            }
            LayerDesc::DenseBlock { in_ch, growth, units, head_out, act } => {
                let mut unit_chains = Vec::with_capacity(*units);
                let mut cur = *in_ch;
                for _ in 0..*units {
                    unit_chains.push(growth_unit(cur, *growth, *act, rng));
                    cur += growth;
                }
                let head = head_out.map(|out| {
                    let mut conv = Conv2d::new(cur, out, (3, 3), (1, 1), (1, 1));
                    init_conv(&mut conv, rng);
                    vec![Layer::Conv2d(conv), Layer::Act(ActLayer::new(Activation::Tanh))]
                });
                net.push_dense(format!("{i:02}_dense"), DenseBlock::new(unit_chains, head));
            }
        }
    }
    Ok(net)
}

/// The four translator networks, built in a fixed order from one stream.
pub struct TranslatorNets<F> {
    pub audio_encoder: Network<F>,
    pub audio_decoder: Network<F>,
    pub generator: Network<F>,
    pub disc_trunk: Network<F>,
    pub disc_head: Network<F>,
}

pub fn build_translator<F: Scalar>(
    schema: &ModelSchema,
    rng: &mut ChaCha8Rng,
) -> S2iResult<TranslatorNets<F>> {
    Ok(TranslatorNets {
        audio_encoder: build_network("a_enc", &schema.audio_encoder, rng)?,
        audio_decoder: build_network("a_dec", &schema.audio_decoder, rng)?,
        generator: build_network("gen", &schema.generator, rng)?,
        disc_trunk: build_network("disc_trunk", &schema.disc_trunk, rng)?,
        disc_head: build_network("disc_head", &schema.disc_head, rng)?,
    })
}

pub fn build_classifier<F: Scalar>(
    schema: &ModelSchema,
    rng: &mut ChaCha8Rng,
) -> S2iResult<Network<F>> {
    build_network("clf", &schema.classifier, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::schema::{Profile, SchemaOptions};
    use crate::nn::init::xavier_bound;
    use crate::nn::{RngState, StreamId};

    fn tiny_schema(f: usize) -> ModelSchema {
        ModelSchema::new(Profile::Tiny, f, SchemaOptions::default()).unwrap()
    }

    #[test]
    fn conv_layer_counts_survive_construction() {
        let schema = ModelSchema::new(Profile::Reference, 128, SchemaOptions::default()).unwrap();
        let mut rng = RngState::new(7);
        let nets: TranslatorNets<f32> = build_translator(&schema, rng.stream(StreamId::Init)).unwrap();
        assert_eq!(nets.audio_encoder.conv_layer_count(), 13);
        assert_eq!(nets.audio_decoder.conv_layer_count(), 13);
        assert_eq!(nets.generator.conv_layer_count(), 25);
        assert_eq!(
            nets.disc_trunk.conv_layer_count() + nets.disc_head.conv_layer_count(),
            13
        );
    }

    #[test]
    fn same_seed_builds_identical_parameters() {
        let schema = tiny_schema(16);
        let mut a: TranslatorNets<f32> =
            build_translator(&schema, RngState::new(3).stream(StreamId::Init)).unwrap();
        let mut b: TranslatorNets<f32> =
            build_translator(&schema, RngState::new(3).stream(StreamId::Init)).unwrap();
        let mut c: TranslatorNets<f32> =
            build_translator(&schema, RngState::new(4).stream(StreamId::Init)).unwrap();
        assert_eq!(a.generator.param_bytes(), b.generator.param_bytes());
        assert_ne!(a.generator.param_bytes(), c.generator.param_bytes());
        assert_eq!(a.audio_encoder.param_bytes(), b.audio_encoder.param_bytes());
    }

    #[test]
    fn every_weight_respects_its_xavier_bound() {
        let schema = tiny_schema(8);
        let mut rng = RngState::new(11);
        let mut nets: TranslatorNets<f64> =
            build_translator(&schema, rng.stream(StreamId::Init)).unwrap();
        let mut clf: Network<f64> = build_classifier(&schema, rng.stream(StreamId::Init)).unwrap();
        for net in [
            &mut nets.audio_encoder,
            &mut nets.audio_decoder,
            &mut nets.generator,
            &mut nets.disc_trunk,
            &mut nets.disc_head,
            &mut clf,
        ] {
            net.visit_params(&mut |name, p, _| {
                if !name.contains("weight") {
                    return;
                }
                let d = p.dims();
                let (fan_in, fan_out) = if d.len() == 4 {
                    (d[1] * d[2] * d[3], d[0] * d[2] * d[3])
                } else {
                    (d[1], d[0])
                };
                let bound = xavier_bound(fan_in, fan_out);
                for &v in p.data() {
                    assert!(
                        v.abs() <= bound,
                        "{name}: {v} outside xavier bound {bound}"
                    );
                }
            });
        }
    }

    #[test]
    fn biases_start_at_zero_and_bn_at_identity() {
        let schema = tiny_schema(16);
        let mut rng = RngState::new(5);
        let mut net: Network<f32> =
            build_network("a_enc", &schema.audio_encoder, rng.stream(StreamId::Init)).unwrap();
        net.visit_params(&mut |name, p, _| {
            if name.ends_with("/bias") || name.ends_with("/beta") {
                assert!(p.data().iter().all(|&v| v == 0.0), "{name} not zero");
            }
            if name.ends_with("/gamma") {
                assert!(p.data().iter().all(|&v| v == 1.0), "{name} not one");
            }
        });
    }

    #[test]
    fn f32_and_f64_builds_draw_identical_values() {
        let schema = tiny_schema(8);
        let mut n32: Network<f32> =
            build_network("gen", &schema.generator, RngState::new(2).stream(StreamId::Init))
                .unwrap();
        let mut n64: Network<f64> =
            build_network("gen", &schema.generator, RngState::new(2).stream(StreamId::Init))
                .unwrap();
        let mut vals32 = Vec::new();
        n32.visit_params(&mut |_, p, _| vals32.extend(p.data().iter().copied()));
        let mut vals64 = Vec::new();
        n64.visit_params(&mut |_, p, _| vals64.extend(p.data().iter().map(|&v| v as f32)));
        assert_eq!(vals32, vals64);
    }
}
