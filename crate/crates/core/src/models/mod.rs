//! Model assembly.
//!
//! Five networks built from declarative schemas: audio encoder and decoder
//! (spectrogram autoencoder), an embedding-conditioned dense generator, a
//! discriminator scoring realness-and-coherence, and the informativity
//! classifier used only for evaluation.
//!
//! The discriminator is a trunk over the image plus a head over the trunk
//! features concatenated with the embedding tiled across the spatial extent,
//! so conditioning enters exactly once, before the final conv.

pub mod build;
pub mod schema;

pub use build::{build_classifier, build_network, build_translator, TranslatorNets};
pub use schema::{conv_count, LayerDesc, ModelSchema, Profile, SchemaOptions, BN_MOMENTUM};

use rand_chacha::ChaCha8Rng;

use crate::error::{S2iError, S2iResult};
use crate::nn::layer::{concat_channels, split_channels};
use crate::nn::{Mode, Network, Scalar, Tensor};

fn expect_dims<F: Scalar>(context: &str, x: &Tensor<F>, want: &[usize]) -> S2iResult<()> {
    // want skips the batch dim
    if x.dims().len() != want.len() + 1 || &x.dims()[1..] != want {
        return Err(S2iError::shape(
            context,
            format!("[b, {}]", want.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
            format!("{:?}", x.dims()),
        ));
    }
    Ok(())
}

/// Spectrogram batch [b, 1, rows, cols] -> embeddings [b, f]. The encoder has
/// no stochastic layers, so eval-mode output depends only on parameters.
pub fn encode_audio<F: Scalar>(
    schema: &ModelSchema,
    enc: &mut Network<F>,
    spec: &Tensor<F>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> S2iResult<Tensor<F>> {
    let (rows, cols) = schema.profile.spectrogram_shape();
    expect_dims("encode_audio input", spec, &[1, rows, cols])?;
    enc.forward(spec, mode, rng, mode == Mode::Train)
}

/// Embeddings [b, f] -> spectrogram batch [b, 1, rows, cols].
pub fn decode_audio<F: Scalar>(
    schema: &ModelSchema,
    dec: &mut Network<F>,
    emb: &Tensor<F>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> S2iResult<Tensor<F>> {
    expect_dims("decode_audio input", emb, &[schema.f])?;
    dec.forward(emb, mode, rng, mode == Mode::Train)
}

/// Embeddings [b, f] -> images [b, 3, s, s]. Between-block dropout stays
/// active in eval mode, so repeated calls differ unless the schema was built
/// with dropout_p = 0 or the caller fixes the rng stream position.
pub fn generate_image<F: Scalar>(
    schema: &ModelSchema,
    gen: &mut Network<F>,
    emb: &Tensor<F>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> S2iResult<Tensor<F>> {
    expect_dims("generate_image input", emb, &[schema.f])?;
    gen.forward(emb, mode, rng, mode == Mode::Train)
}

/// Discriminator: image trunk, embedding tiling, scoring head.
pub struct Discriminator<F> {
    pub trunk: Network<F>,
    pub head: Network<F>,
    f: usize,
    // set by forward(record=true): trunk output channels and spatial size
    concat_split: Option<(usize, usize, usize)>,
}

/// [b, f] -> [b, f, h, w] by spatial replication.
fn tile_embedding<F: Scalar>(emb: &Tensor<F>, h: usize, w: usize) -> Tensor<F> {
    let (b, f) = (emb.dims()[0], emb.dims()[1]);
    let mut out = Tensor::zeros(&[b, f, h, w]);
    let od = out.data_mut();
    for i in 0..b {
        for c in 0..f {
            let v = emb.data()[i * f + c];
            let base = (i * f + c) * h * w;
            for s in 0..h * w {
                od[base + s] = v;
            }
        }
    }
    out
}

impl<F: Scalar> Discriminator<F> {
    pub fn new(trunk: Network<F>, head: Network<F>, f: usize) -> Self {
        Discriminator {
            trunk,
            head,
            f,
            concat_split: None,
        }
    }

    pub fn from_schema(schema: &ModelSchema, rng: &mut ChaCha8Rng) -> S2iResult<Self> {
        let trunk = build_network("disc_trunk", &schema.disc_trunk, rng)?;
        let head = build_network("disc_head", &schema.disc_head, rng)?;
        Ok(Discriminator::new(trunk, head, schema.f))
    }

    /// Images [b, 3, s, s] + embeddings [b, f] -> scores [b, 1] in [-1, 1].
    pub fn forward(
        &mut self,
        img: &Tensor<F>,
        emb: &Tensor<F>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
        record: bool,
    ) -> S2iResult<Tensor<F>> {
        if emb.dims().len() != 2 || emb.dims()[1] != self.f {
            return Err(S2iError::shape(
                "discriminate embedding",
                format!("[b, {}]", self.f),
                format!("{:?}", emb.dims()),
            ));
        }
        if img.dims()[0] != emb.dims()[0] {
            return Err(S2iError::shape(
                "discriminate batch",
                format!("image batch {}", img.dims()[0]),
                format!("embedding batch {}", emb.dims()[0]),
            ));
        }
        let feat = self.trunk.forward(img, mode, rng, record)?;
        let d = feat.dims().to_vec();
        let tiled = tile_embedding(emb, d[2], d[3]);
        let joint = concat_channels(&[feat, tiled]);
        self.concat_split = record.then_some((d[1], d[2], d[3]));
        self.head.forward(&joint, mode, rng, record)
    }

    /// Returns (d image, d embedding). Requires a prior forward with
    /// record = true.
    pub fn backward(&mut self, dscore: &Tensor<F>) -> S2iResult<(Tensor<F>, Tensor<F>)> {
        let (trunk_c, h, w) = self.concat_split.ok_or_else(|| {
            S2iError::Training("discriminator backward without recorded forward".into())
        })?;
        let djoint = self.head.backward(dscore)?;
        let parts = split_channels(&djoint, &[trunk_c, self.f]);
        let dimg = self.trunk.backward(&parts[0])?;
        // tile backward: sum over the spatial extent
        let b = parts[1].dims()[0];
        let mut demb = Tensor::zeros(&[b, self.f]);
        let dd = demb.data_mut();
        let src = parts[1].data();
        for i in 0..b {
            for c in 0..self.f {
                let base = (i * self.f + c) * h * w;
                let mut acc = F::zero();
                for s in 0..h * w {
                    acc = acc + src[base + s];
                }
                dd[i * self.f + c] = acc;
            }
        }
        Ok((dimg, demb))
    }

    pub fn zero_grads(&mut self) {
        self.trunk.zero_grads();
        self.head.zero_grads();
    }

    pub fn param_bytes(&mut self) -> Vec<u8> {
        let mut bytes = self.trunk.param_bytes();
        bytes.extend(self.head.param_bytes());
        bytes
    }

    pub fn params_finite(&mut self) -> bool {
        self.trunk.params_finite() && self.head.params_finite()
    }
}
