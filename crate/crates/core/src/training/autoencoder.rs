//! Joint pretraining of the audio encoder/decoder pair on spectrogram
//! reconstruction. Batches are drawn without replacement from a fresh
//! per-epoch shuffle; a trailing partial batch is dropped.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{epoch_order, spec_batch, Sample};
use crate::error::{S2iError, S2iResult};
use crate::losses::audio_recon_loss;
use crate::models::{build_network, decode_audio, encode_audio, ModelSchema};
use crate::nn::layer::Mode;
use crate::nn::net::Network;
use crate::nn::optim::SgdMomentum;
use crate::nn::rng::{RngState, StreamId};
use crate::nn::scalar::Scalar;
use crate::training::checkpoint::{save_ae_state, RunMeta};
use crate::training::ledger::{EpochRecord, RunLedger};
use crate::training::{guard_check, TrainConfig};

pub struct AeOutcome {
    pub enc: Network<f32>,
    pub dec: Network<f32>,
    pub ledger: RunLedger,
    pub final_checkpoint: PathBuf,
}

fn ae_meta(
    cfg: &TrainConfig,
    iteration: u64,
    epoch: u64,
    rng: &RngState,
    guard_ae: Option<f64>,
    ledger: &RunLedger,
) -> RunMeta {
    let mut meta = RunMeta {
        phase: "ae".into(),
        config: cfg.clone(),
        iteration,
        epoch,
        seed: cfg.seed,
        rng_pos: ["0".into(), "0".into(), "0".into()],
        adv_history: None,
        guard_ae,
        guard_pixel: None,
        guard_d: None,
        epoch_order: Vec::new(),
        next_batch: 0,
        ledger: ledger.clone(),
    };
    meta.set_rng(rng);
    meta
}

/// Minimizes mean squared spectrogram reconstruction error with one SGD step
/// per batch through both networks. Returns the trained pair, the loss
/// ledger, and the final checkpoint path.
pub fn train_autoencoder(
    schema: &ModelSchema,
    cfg: &TrainConfig,
    samples: &[Sample<f32>],
    out_dir: &Path,
) -> S2iResult<AeOutcome> {
    cfg.validate()?;
    if samples.len() < cfg.batch_size {
        return Err(S2iError::Data(format!(
            "need at least one full batch: {} samples < batch_size {}",
            samples.len(),
            cfg.batch_size
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| S2iError::io(out_dir.display().to_string(), e))?;

    let mut rng = RngState::new(cfg.seed);
    let mut enc = build_network::<f32>("a_enc", &schema.audio_encoder, rng.stream(StreamId::Init))?;
    let mut dec = build_network::<f32>("a_dec", &schema.audio_decoder, rng.stream(StreamId::Init))?;
    let mut opt_enc = SgdMomentum::<f32>::new(cfg.lr_ae, cfg.momentum_ae, 0.0);
    let mut opt_dec = SgdMomentum::<f32>::new(cfg.lr_ae, cfg.momentum_ae, 0.0);

    let mut ledger = RunLedger::default();
    let mut guard_ae: Option<f64> = None;
    let mut last_good: Option<String> = None;
    let mut iteration: u64 = 0;
    let b = cfg.batch_size;

    for epoch in 1..=cfg.ae_epochs as u64 {
        let order = epoch_order(samples.len(), rng.stream(StreamId::DataOrder));
        let mut epoch_sum = 0.0f64;
        let mut epoch_batches = 0usize;
        for idxs in order.chunks_exact(b) {
            iteration += 1;
            let spec = spec_batch(samples, idxs);
            let emb = encode_audio(schema, &mut enc, &spec, Mode::Train, rng.stream(StreamId::Dropout))?;
            let recon =
                decode_audio(schema, &mut dec, &emb, Mode::Train, rng.stream(StreamId::Dropout))?;
            let (loss, dloss) = audio_recon_loss(&spec, &recon)?;
            let loss = loss.to_f64();
            if !loss.is_finite() {
                return Err(S2iError::NonFinite {
                    context: "l_a".into(),
                    iteration,
                    checkpoint: last_good.clone(),
                });
            }
            enc.zero_grads();
            dec.zero_grads();
            let demb = dec.backward(&dloss)?;
            enc.backward(&demb)?;
            opt_enc.step(&mut enc)?;
            opt_dec.step(&mut dec)?;
            epoch_sum += loss;
            epoch_batches += 1;
        }

        let mean = epoch_sum / epoch_batches as f64;
        ledger.epochs.push(EpochRecord {
            epoch,
            l_a: Some(mean),
            l_g_pixel: None,
            l_g_adv: None,
            l_g_ma: None,
            l_d: None,
        });
        match guard_ae {
            None => guard_ae = Some(mean),
            Some(first) => guard_check("l_a", epoch, mean, first).map_err(|e| {
                S2iError::Training(match &last_good {
                    Some(p) => format!("{e} (last good checkpoint: {p})"),
                    None => e.to_string(),
                })
            })?,
        }

        if cfg.checkpoint_every > 0 && epoch as usize % cfg.checkpoint_every == 0 {
            let path = out_dir.join(format!("ae_e{epoch:04}.s2ic"));
            let meta = ae_meta(cfg, iteration, epoch, &rng, guard_ae, &ledger);
            save_ae_state(&path, schema, &meta, &mut enc, &mut dec, &opt_enc, &opt_dec)?;
            last_good = Some(path.display().to_string());
        }
    }

    let final_checkpoint = out_dir.join("ae_final.s2ic");
    let meta = ae_meta(cfg, iteration, cfg.ae_epochs as u64, &rng, guard_ae, &ledger);
    save_ae_state(
        &final_checkpoint,
        schema,
        &meta,
        &mut enc,
        &mut dec,
        &opt_enc,
        &opt_dec,
    )?;
    ledger.write_ae_csv(&out_dir.join("ae_loss.csv"))?;

    Ok(AeOutcome {
        enc,
        dec,
        ledger,
        final_checkpoint,
    })
}
