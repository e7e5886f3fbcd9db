//! Deterministic sound-to-image translation pipeline.
//!
//! The crate turns short mono audio clips into small RGB images through three
//! trainable parts: an audio autoencoder whose bottleneck embedding summarizes
//! the clip, an embedding-conditioned dense-convolutional generator, and a
//! conditioned discriminator that scores realness-and-coherence. Everything is
//! CPU-only, single-threaded and reproducible: the same seed yields the same
//! corpus, the same training trajectory and the same translations, byte for byte.
//!
//! Module map:
//! - [`dsp`]: log-Mel spectrogram frontend and normalization
//! - [`nn`]: tensors, layers with hand-written backprop, init, SGD, gradient checking
//! - [`models`]: encoder/decoder/generator/discriminator/classifier assembly
//! - [`losses`]: reconstruction, score and moving-average adversarial losses
//! - [`training`]: autoencoder and GAN loops, checkpointing, embedding sweep
//! - [`data`]: manifests, scene-disjoint splits, image prep, synthetic corpus
//! - [`eval`]: informativity classifiers, epoch metric series, reports
//! - [`io`]: WAV/PNG adapters and the spectrogram/checkpoint binary formats

pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod io;
pub mod losses;
pub mod models;
pub mod nn;
pub mod training;

pub use error::{S2iError, S2iResult};
