//! Adversarial phase. Each 1-indexed iteration draws one batch, updates the
//! discriminator when the cadence fires (balanced real/synthetic halves,
//! generator frozen), and always updates the generator against the pixel term
//! plus the smoothed adversarial term (discriminator frozen, encoder frozen
//! throughout). History entries are constants for the current update, so the
//! adversarial gradient is scaled by 1/divisor.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{epoch_order, image_batch, spec_batch, Sample};
use crate::error::{S2iError, S2iResult};
use crate::losses::{image_recon_loss, score_loss, AdvLossHistory};
use crate::models::{encode_audio, generate_image, Discriminator, ModelSchema};
use crate::nn::layer::Mode;
use crate::nn::net::Network;
use crate::nn::optim::SgdMomentum;
use crate::nn::rng::{RngState, StreamId};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;
use crate::training::checkpoint::{load_gan_nets, save_gan_state, RunMeta};
use crate::training::ledger::{EpochRecord, IterRecord, RunLedger};
use crate::training::{guard_check, NgdUnit, TrainConfig};

pub struct GanOutcome {
    pub enc: Network<f32>,
    pub gen: Network<f32>,
    pub disc: Discriminator<f32>,
    pub ledger: RunLedger,
    pub history: AdvLossHistory,
    pub final_checkpoint: PathBuf,
}

pub struct GanTrainer {
    pub schema: ModelSchema,
    pub cfg: TrainConfig,
    pub enc: Network<f32>,
    pub gen: Network<f32>,
    pub disc: Discriminator<f32>,
    opt_g: SgdMomentum<f32>,
    opt_dt: SgdMomentum<f32>,
    opt_dh: SgdMomentum<f32>,
    pub history: AdvLossHistory,
    pub rng: RngState,
    /// Completed iterations.
    pub iteration: u64,
    /// Epoch in progress, 1-indexed; 0 means not started.
    pub epoch: u64,
    pub ledger: RunLedger,
    enc_bytes: Vec<u8>,
    guard_pixel: Option<f64>,
    guard_d: Option<f64>,
    epoch_order: Vec<usize>,
    next_batch: usize,
    last_good: Option<String>,
}

impl GanTrainer {
    /// Fresh trainer around a pretrained, frozen encoder. Generator and
    /// discriminator are initialized from the run seed's init stream.
    pub fn new(schema: &ModelSchema, cfg: &TrainConfig, mut enc: Network<f32>) -> S2iResult<Self> {
        cfg.validate()?;
        let mut rng = RngState::new(cfg.seed);
        let gen = crate::models::build_network::<f32>(
            "gen",
            &schema.generator,
            rng.stream(StreamId::Init),
        )?;
        let disc = Discriminator::from_schema(schema, rng.stream(StreamId::Init))?;
        let enc_bytes = enc.param_bytes();
        let history = AdvLossHistory::new(cfg.ma_k)?;
        Ok(GanTrainer {
            schema: schema.clone(),
            cfg: cfg.clone(),
            enc,
            gen,
            disc,
            opt_g: SgdMomentum::new(cfg.lr_gan, cfg.momentum_gan, 0.0),
            opt_dt: SgdMomentum::new(cfg.lr_gan, cfg.momentum_gan, 0.0),
            opt_dh: SgdMomentum::new(cfg.lr_gan, cfg.momentum_gan, 0.0),
            history,
            rng,
            iteration: 0,
            epoch: 0,
            ledger: RunLedger::default(),
            enc_bytes,
            guard_pixel: None,
            guard_d: None,
            epoch_order: Vec::new(),
            next_batch: 0,
            last_good: None,
        })
    }

    fn d_due(&self, iteration: u64) -> bool {
        match self.cfg.n_gd_unit {
            NgdUnit::Iteration => iteration % self.cfg.n_gd == 0,
            NgdUnit::Epoch => self.epoch % self.cfg.n_gd == 0,
        }
    }

    /// Discriminator update: one accumulated step over a real batch scored
    /// toward r_max and a synthetic batch scored toward r_min.
    fn d_step(&mut self, imgs: &Tensor<f32>, emb: &Tensor<f32>) -> S2iResult<(f64, usize, usize)> {
        self.disc.zero_grads();
        let synth = generate_image(
            &self.schema,
            &mut self.gen,
            emb,
            Mode::Eval,
            self.rng.stream(StreamId::Dropout),
        )?;
        let s_real = self.disc.forward(
            imgs,
            emb,
            Mode::Train,
            self.rng.stream(StreamId::Dropout),
            true,
        )?;
        let (l_real, d_real) = score_loss(self.cfg.r_max, &s_real)?;
        self.disc.backward(&d_real)?;
        let s_syn = self.disc.forward(
            &synth,
            emb,
            Mode::Train,
            self.rng.stream(StreamId::Dropout),
            true,
        )?;
        let (l_syn, d_syn) = score_loss(self.cfg.r_min, &s_syn)?;
        self.disc.backward(&d_syn)?;
        self.opt_dt.step(&mut self.disc.trunk)?;
        self.opt_dh.step(&mut self.disc.head)?;
        let b = imgs.dims()[0];
        Ok((l_real.to_f64() + l_syn.to_f64(), b, b))
    }

    /// Generator update: pixel reconstruction plus the moving-average
    /// adversarial term, backpropagated through the frozen discriminator.
    fn g_step(
        &mut self,
        imgs: &Tensor<f32>,
        emb: &Tensor<f32>,
    ) -> S2iResult<(f64, f64, f64, usize)> {
        self.gen.zero_grads();
        let yhat = generate_image(
            &self.schema,
            &mut self.gen,
            emb,
            Mode::Train,
            self.rng.stream(StreamId::Dropout),
        )?;
        let (l_pix, d_pix) = image_recon_loss(imgs, &yhat)?;
        let scores = self.disc.forward(
            &yhat,
            emb,
            Mode::Eval,
            self.rng.stream(StreamId::Dropout),
            true,
        )?;
        let (l_adv, d_score) = score_loss(self.cfg.r_max, &scores)?;
        let l_adv = l_adv.to_f64();
        let (ma, divisor) = self.history.moving_average(l_adv);
        let scale = (self.cfg.lambda / divisor as f64) as f32;
        let d_score = d_score.map(|v| v * scale);
        let (d_img_adv, _d_emb) = self.disc.backward(&d_score)?;
        let mut d_total = d_pix;
        for (t, &a) in d_total.data_mut().iter_mut().zip(d_img_adv.data()) {
            *t = *t + a;
        }
        self.gen.backward(&d_total)?;
        self.opt_g.step(&mut self.gen)?;
        Ok((l_pix.to_f64(), l_adv, ma, divisor))
    }

    /// One full iteration over the given sample indices.
    fn iterate(&mut self, samples: &[Sample<f32>], idxs: &[usize]) -> S2iResult<()> {
        let iteration = self.iteration + 1;
        let spec = spec_batch(samples, idxs);
        let imgs = image_batch(samples, idxs);
        let emb = encode_audio(
            &self.schema,
            &mut self.enc,
            &spec,
            Mode::Eval,
            self.rng.stream(StreamId::Dropout),
        )?;

        let d_due = self.d_due(iteration);
        let (mut l_d, mut real_n, mut synth_n) = (None, 0, 0);
        if d_due {
            let (ld, nr, ns) = self.d_step(&imgs, &emb)?;
            l_d = Some(ld);
            real_n = nr;
            synth_n = ns;
        }
        let (l_pix, l_adv, l_ma, divisor) = self.g_step(&imgs, &emb)?;

        self.iteration = iteration;
        self.ledger.iterations.push(IterRecord {
            iteration,
            epoch: self.epoch,
            d_updated: d_due,
            real_images: real_n,
            synth_images: synth_n,
            l_g_pixel: l_pix,
            l_g_adv: l_adv,
            l_g_ma: l_ma,
            ma_divisor: divisor,
            l_d,
        });

        let bad = !l_pix.is_finite() || !l_adv.is_finite() || l_d.is_some_and(|v| !v.is_finite());
        if bad {
            return Err(S2iError::NonFinite {
                context: "gan losses".into(),
                iteration,
                checkpoint: self.last_good.clone(),
            });
        }
        Ok(())
    }

    fn epoch_rows(&self, epoch: u64) -> Vec<&IterRecord> {
        self.ledger
            .iterations
            .iter()
            .filter(|r| r.epoch == epoch)
            .collect()
    }

    fn push_epoch_record(&mut self, epoch: u64) -> (f64, Option<f64>) {
        // A capped run may have flushed a provisional row for this epoch;
        // the full-epoch means replace it.
        self.ledger.epochs.retain(|e| e.epoch != epoch);
        let rows = self.epoch_rows(epoch);
        let n = rows.len() as f64;
        let m_pix = rows.iter().map(|r| r.l_g_pixel).sum::<f64>() / n;
        let m_adv = rows.iter().map(|r| r.l_g_adv).sum::<f64>() / n;
        let m_ma = rows.iter().map(|r| r.l_g_ma).sum::<f64>() / n;
        let d_vals: Vec<f64> = rows.iter().filter_map(|r| r.l_d).collect();
        let m_d = if d_vals.is_empty() {
            None
        } else {
            Some(d_vals.iter().sum::<f64>() / d_vals.len() as f64)
        };
        self.ledger.epochs.push(EpochRecord {
            epoch,
            l_a: None,
            l_g_pixel: Some(m_pix),
            l_g_adv: Some(m_adv),
            l_g_ma: Some(m_ma),
            l_d: m_d,
        });
        self.history.push_epoch(m_adv);
        (m_pix, m_d)
    }

    fn with_last_good(&self, e: S2iError) -> S2iError {
        S2iError::Training(match &self.last_good {
            Some(p) => format!("{e} (last good checkpoint: {p})"),
            None => e.to_string(),
        })
    }

    fn finish_epoch(&mut self, out_dir: &Path) -> S2iResult<()> {
        let epoch = self.epoch;
        let (m_pix, m_d) = self.push_epoch_record(epoch);

        if self.enc.param_bytes() != self.enc_bytes {
            return Err(S2iError::Training(
                "frozen encoder drifted during adversarial training".into(),
            ));
        }

        match self.guard_pixel {
            None => self.guard_pixel = Some(m_pix),
            Some(first) => {
                guard_check("l_g_pixel", epoch, m_pix, first).map_err(|e| self.with_last_good(e))?
            }
        }
        if let Some(md) = m_d {
            match self.guard_d {
                None => self.guard_d = Some(md),
                Some(first) => {
                    guard_check("l_d", epoch, md, first).map_err(|e| self.with_last_good(e))?
                }
            }
        }

        if let Some(step) = self.cfg.lr_step {
            if epoch as usize % step.every == 0 {
                let decay = step.decay as f32;
                self.opt_g.lr *= decay;
                self.opt_dt.lr *= decay;
                self.opt_dh.lr *= decay;
            }
        }

        // Clear the batch cursor before any save so a state restored from an
        // epoch boundary cannot replay this epoch's bookkeeping.
        self.epoch_order.clear();
        self.next_batch = 0;

        if self.cfg.checkpoint_every > 0 && epoch as usize % self.cfg.checkpoint_every == 0 {
            let path = out_dir.join(format!("gan_e{epoch:04}.s2ic"));
            self.save(&path)?;
            self.last_good = Some(path.display().to_string());
        }
        Ok(())
    }

    fn meta(&self) -> RunMeta {
        let mut meta = RunMeta {
            phase: "gan".into(),
            config: self.cfg.clone(),
            iteration: self.iteration,
            epoch: self.epoch,
            seed: self.cfg.seed,
            rng_pos: ["0".into(), "0".into(), "0".into()],
            adv_history: Some(self.history.clone()),
            guard_ae: None,
            guard_pixel: self.guard_pixel,
            guard_d: self.guard_d,
            epoch_order: self.epoch_order.clone(),
            next_batch: self.next_batch,
            ledger: self.ledger.clone(),
        };
        meta.set_rng(&self.rng);
        meta
    }

    pub fn save(&mut self, path: &Path) -> S2iResult<()> {
        let meta = self.meta();
        let schema = self.schema.clone();
        save_gan_state(
            path,
            &schema,
            &meta,
            &mut self.enc,
            &mut self.gen,
            &mut self.disc.trunk,
            &mut self.disc.head,
            &self.opt_g,
            &self.opt_dt,
            &self.opt_dh,
        )
    }

    fn reached_cap(&self) -> bool {
        matches!(self.cfg.gan_iterations, Some(cap) if self.iteration >= cap)
    }

    fn begin_epoch(&mut self, n: usize) {
        self.epoch += 1;
        self.epoch_order = epoch_order(n, self.rng.stream(StreamId::DataOrder));
        self.next_batch = 0;
    }

    /// Drives training to the configured end: either the iteration cap or the
    /// epoch count. Safe to call on a freshly restored mid-epoch state.
    pub fn run(&mut self, samples: &[Sample<f32>], out_dir: &Path) -> S2iResult<()> {
        let n = samples.len();
        let b = self.cfg.batch_size;
        if n < b {
            return Err(S2iError::Data(format!(
                "need at least one full batch: {n} samples < batch_size {b}"
            )));
        }
        fs::create_dir_all(out_dir).map_err(|e| S2iError::io(out_dir.display().to_string(), e))?;
        let batches_per_epoch = n / b;

        loop {
            if self.reached_cap() {
                break;
            }
            if self.epoch == 0 {
                self.begin_epoch(n);
            } else if self.epoch_order.is_empty() {
                // Restored from an epoch-boundary save: that epoch's record,
                // guards, and lr step are already applied.
                if self.cfg.gan_iterations.is_none() && self.epoch >= self.cfg.gan_epochs as u64 {
                    return Ok(());
                }
                self.begin_epoch(n);
            }
            if self.next_batch >= batches_per_epoch {
                self.finish_epoch(out_dir)?;
                if self.cfg.gan_iterations.is_none() && self.epoch >= self.cfg.gan_epochs as u64 {
                    return Ok(());
                }
                self.begin_epoch(n);
                continue;
            }
            let start = self.next_batch * b;
            let idxs: Vec<usize> = self.epoch_order[start..start + b].to_vec();
            self.iterate(samples, &idxs)?;
            self.next_batch += 1;
        }

        // Iteration cap hit mid-epoch: record the partial epoch without
        // feeding it into the history or the guards.
        let rows = self.epoch_rows(self.epoch);
        if !rows.is_empty() && self.ledger.epochs.iter().all(|e| e.epoch != self.epoch) {
            let n_rows = rows.len() as f64;
            let m_pix = rows.iter().map(|r| r.l_g_pixel).sum::<f64>() / n_rows;
            let m_adv = rows.iter().map(|r| r.l_g_adv).sum::<f64>() / n_rows;
            let m_ma = rows.iter().map(|r| r.l_g_ma).sum::<f64>() / n_rows;
            let d_vals: Vec<f64> = rows.iter().filter_map(|r| r.l_d).collect();
            let m_d = if d_vals.is_empty() {
                None
            } else {
                Some(d_vals.iter().sum::<f64>() / d_vals.len() as f64)
            };
            self.ledger.epochs.push(EpochRecord {
                epoch: self.epoch,
                l_a: None,
                l_g_pixel: Some(m_pix),
                l_g_adv: Some(m_adv),
                l_g_ma: Some(m_ma),
                l_d: m_d,
            });
        }
        Ok(())
    }

    fn finalize(mut self, out_dir: &Path) -> S2iResult<GanOutcome> {
        if self.enc.param_bytes() != self.enc_bytes {
            return Err(S2iError::Training(
                "frozen encoder drifted during adversarial training".into(),
            ));
        }
        let final_checkpoint = out_dir.join("gan_final.s2ic");
        self.save(&final_checkpoint)?;
        self.ledger.write_gan_csv(&out_dir.join("gan_loss.csv"))?;
        Ok(GanOutcome {
            enc: self.enc,
            gen: self.gen,
            disc: self.disc,
            ledger: self.ledger,
            history: self.history,
            final_checkpoint,
        })
    }
}

/// Trains the generator and discriminator against a frozen encoder. Writes
/// per-epoch losses to gan_loss.csv and the complete run state to
/// gan_final.s2ic in `out_dir`.
pub fn train_gan(
    schema: &ModelSchema,
    cfg: &TrainConfig,
    samples: &[Sample<f32>],
    enc: Network<f32>,
    out_dir: &Path,
) -> S2iResult<GanOutcome> {
    let mut trainer = GanTrainer::new(schema, cfg, enc)?;
    trainer.run(samples, out_dir)?;
    trainer.finalize(out_dir)
}

/// Checks that a resume override only relaxes run length, never the parts
/// that would silently change the optimization.
fn override_compatible(saved: &TrainConfig, wanted: &TrainConfig) -> bool {
    let mut a = saved.clone();
    let mut b = wanted.clone();
    a.gan_iterations = None;
    b.gan_iterations = None;
    a.gan_epochs = 0;
    b.gan_epochs = 0;
    a.checkpoint_every = 0;
    b.checkpoint_every = 0;
    a == b
}

/// Continues an adversarial run from a saved state file. `cfg_override` may
/// extend `gan_iterations`, `gan_epochs`, or the checkpoint cadence; any
/// other difference from the saved config is rejected.
pub fn resume_gan(
    path: &Path,
    samples: &[Sample<f32>],
    out_dir: &Path,
    cfg_override: Option<&TrainConfig>,
) -> S2iResult<GanOutcome> {
    let state = load_gan_nets(path)?;
    let meta = state.meta;
    let cfg = match cfg_override {
        Some(c) => {
            if !override_compatible(&meta.config, c) {
                return Err(S2iError::Config(
                    "resume override may only change gan_iterations, gan_epochs, or checkpoint_every"
                        .into(),
                ));
            }
            c.clone()
        }
        None => meta.config.clone(),
    };
    cfg.validate()?;

    let history = match &meta.adv_history {
        Some(h) => h.clone(),
        None => AdvLossHistory::new(cfg.ma_k)?,
    };
    let mut enc = state.enc;
    let enc_bytes = enc.param_bytes();
    let mut trainer = GanTrainer {
        schema: state.schema,
        cfg,
        enc,
        gen: state.gen,
        disc: state.disc,
        opt_g: state.opt_g,
        opt_dt: state.opt_dt,
        opt_dh: state.opt_dh,
        history,
        rng: meta.restore_rng()?,
        iteration: meta.iteration,
        epoch: meta.epoch,
        ledger: meta.ledger.clone(),
        enc_bytes,
        guard_pixel: meta.guard_pixel,
        guard_d: meta.guard_d,
        epoch_order: meta.epoch_order.clone(),
        next_batch: meta.next_batch,
        last_good: Some(path.display().to_string()),
    };
    trainer.run(samples, out_dir)?;
    trainer.finalize(out_dir)
}
