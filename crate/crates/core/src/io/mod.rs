//! File formats and media adapters: mono WAV in/out, PNG in/out, the
//! spectrogram binary format and the checkpoint container.

pub mod checkpoint;
pub mod png;
pub mod specfile;
pub mod wav;

pub use checkpoint::{fnv1a64, read_checkpoint, write_checkpoint, CheckpointData, OPT_PREFIX};
pub use png::{load_rgb8, rgb8_to_tensor, save_rgb8, tensor_to_rgb8};
pub use specfile::{read_norm_stats, read_spectrogram, write_norm_stats, write_spectrogram};
pub use wav::{read_wav_mono, write_wav_mono};
