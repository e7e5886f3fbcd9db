//! Optimization drivers: autoencoder pretraining, the adversarial phase with
//! its interleaved update schedule, run-state checkpointing, and the
//! embedding-width sweep.

mod autoencoder;
mod checkpoint;
mod gan;
mod ledger;
mod sweep;

pub use autoencoder::{train_autoencoder, AeOutcome};
pub use checkpoint::{
    load_ae_nets, load_gan_nets, load_run_state, restore_into, save_ae_state, save_gan_state,
    save_run_state, GanState, RunMeta,
};
pub use gan::{resume_gan, train_gan, GanOutcome, GanTrainer};
pub use ledger::{EpochRecord, IterRecord, RunLedger};
pub use sweep::{embedding_sweep, SweepRun};

use serde::{Deserialize, Serialize};

use crate::error::{S2iError, S2iResult};

/// Granularity of the discriminator-update cadence. `Iteration` applies
/// `n_gd` to the 1-indexed global iteration counter; `Epoch` updates the
/// discriminator on every iteration of each `n_gd`-th epoch.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NgdUnit {
    Iteration,
    Epoch,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub ae_epochs: usize,
    pub gan_epochs: usize,
    /// Hard iteration cap for the adversarial phase; overrides `gan_epochs`
    /// when set.
    pub gan_iterations: Option<u64>,
    pub n_gd: u64,
    pub n_gd_unit: NgdUnit,
    pub lambda: f64,
    pub ma_k: usize,
    pub lr_ae: f64,
    pub momentum_ae: f64,
    pub lr_gan: f64,
    pub momentum_gan: f64,
    /// Multiply both GAN learning rates by `decay` every `every` epochs.
    /// Disabled by default.
    pub lr_step: Option<LrStep>,
    pub r_max: f64,
    pub r_min: f64,
    pub seed: u64,
    /// Checkpoint every this many epochs; 0 writes only the final state.
    pub checkpoint_every: usize,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct LrStep {
    pub every: usize,
    pub decay: f64,
}

impl TrainConfig {
    pub fn reference(seed: u64) -> Self {
        TrainConfig {
            batch_size: 64,
            ae_epochs: 100,
            gan_epochs: 100,
            gan_iterations: None,
            n_gd: 5,
            n_gd_unit: NgdUnit::Iteration,
            lambda: 0.1,
            ma_k: 5,
            lr_ae: 0.05,
            momentum_ae: 0.9,
            lr_gan: 0.1,
            momentum_gan: 0.5,
            lr_step: None,
            r_max: 1.0,
            r_min: -1.0,
            seed,
            checkpoint_every: 10,
        }
    }

    pub fn tiny(seed: u64) -> Self {
        TrainConfig {
            batch_size: 8,
            ae_epochs: 20,
            gan_epochs: 20,
            ..TrainConfig::reference(seed)
        }
    }

    pub fn validate(&self) -> S2iResult<()> {
        if self.batch_size == 0 {
            return Err(S2iError::Config("batch_size must be >= 1".into()));
        }
        if self.n_gd == 0 {
            return Err(S2iError::Config("n_gd must be >= 1".into()));
        }
        if self.lambda < 0.0 {
            return Err(S2iError::Config("lambda must be >= 0".into()));
        }
        if self.ma_k == 0 {
            return Err(S2iError::Config("ma_k must be >= 1".into()));
        }
        if !(self.r_min < self.r_max) {
            return Err(S2iError::Config(format!(
                "score targets must satisfy r_min < r_max, got {} >= {}",
                self.r_min, self.r_max
            )));
        }
        if self.r_min < -1.0 || self.r_max > 1.0 {
            return Err(S2iError::Config(
                "score targets must lie in [-1, 1]".into(),
            ));
        }
        for (name, v) in [
            ("lr_ae", self.lr_ae),
            ("momentum_ae", self.momentum_ae),
            ("lr_gan", self.lr_gan),
            ("momentum_gan", self.momentum_gan),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(S2iError::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if let Some(step) = self.lr_step {
            if step.every == 0 || !step.decay.is_finite() || step.decay <= 0.0 {
                return Err(S2iError::Config(
                    "lr_step requires every >= 1 and decay > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Abort threshold for the divergence guard: an epoch-mean loss above
/// `GUARD_FACTOR` times its first-epoch value stops the run.
pub const GUARD_FACTOR: f64 = 1e3;

pub(crate) fn guard_check(name: &str, epoch: u64, value: f64, reference: f64) -> S2iResult<()> {
    if reference > 0.0 && value > GUARD_FACTOR * reference {
        return Err(S2iError::Training(format!(
            "{name} diverged at epoch {epoch}: {value} exceeds {GUARD_FACTOR}x first-epoch value {reference}"
        )));
    }
    Ok(())
}
