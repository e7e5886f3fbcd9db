//! Run bookkeeping: per-iteration records for the adversarial phase,
//! per-epoch aggregates for both phases, and the loss CSVs. Floats are
//! written with shortest-round-trip formatting so identical runs produce
//! byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{S2iError, S2iResult};

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iteration: u64,
    pub epoch: u64,
    pub d_updated: bool,
    pub real_images: usize,
    pub synth_images: usize,
    pub l_g_pixel: f64,
    pub l_g_adv: f64,
    pub l_g_ma: f64,
    pub ma_divisor: usize,
    pub l_d: Option<f64>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub l_a: Option<f64>,
    pub l_g_pixel: Option<f64>,
    pub l_g_adv: Option<f64>,
    pub l_g_ma: Option<f64>,
    pub l_d: Option<f64>,
}

#[derive(Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct RunLedger {
    pub iterations: Vec<IterRecord>,
    pub epochs: Vec<EpochRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunLedger {
    pub fn d_update_count(&self) -> usize {
        self.iterations.iter().filter(|r| r.d_updated).count()
    }

    pub fn g_update_count(&self) -> usize {
        self.iterations.len()
    }

    pub fn write_ae_csv(&self, path: &Path) -> S2iResult<()> {
        let mut out = String::from("epoch,l_a\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{}\n", e.epoch, opt(e.l_a)));
        }
        fs::write(path, out).map_err(|e| S2iError::io(path.display().to_string(), e))
    }

    pub fn write_gan_csv(&self, path: &Path) -> S2iResult<()> {
        let mut out = String::from("epoch,l_g_pixel,l_g_adv,l_g_ma_adv,l_d\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch,
                opt(e.l_g_pixel),
                opt(e.l_g_adv),
                opt(e.l_g_ma),
                opt(e.l_d)
            ));
        }
        fs::write(path, out).map_err(|e| S2iError::io(path.display().to_string(), e))
    }
}
