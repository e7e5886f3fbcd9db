//! Embedding-width sweep: full autoencoder + adversarial runs per candidate
//! f, isolated run directories, and a merged summary keyed by f.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::Sample;
use crate::error::{S2iError, S2iResult};
use crate::models::{ModelSchema, Profile, SchemaOptions};
use crate::training::{train_autoencoder, train_gan, RunLedger, TrainConfig};

pub struct SweepRun {
    pub f: usize,
    pub run_dir: PathBuf,
    pub ae_final: PathBuf,
    pub gan_final: PathBuf,
    pub ae_ledger: RunLedger,
    pub gan_ledger: RunLedger,
}

fn run_one(
    profile: Profile,
    options: SchemaOptions,
    f: usize,
    cfg: &TrainConfig,
    samples: &[Sample<f32>],
    run_dir: &Path,
) -> S2iResult<SweepRun> {
    let schema = ModelSchema::new(profile, f, options)?;
    let ae = train_autoencoder(&schema, cfg, samples, &run_dir.join("ae"))?;
    let gan = train_gan(&schema, cfg, samples, ae.enc, &run_dir.join("gan"))?;
    Ok(SweepRun {
        f,
        run_dir: run_dir.to_path_buf(),
        ae_final: ae.final_checkpoint,
        gan_final: gan.final_checkpoint,
        ae_ledger: ae.ledger,
        gan_ledger: gan.ledger,
    })
}

/// Trains one translator per embedding width under `out_root/f{f:04}`.
/// A failed width is recorded and the sweep moves on; sweep.csv summarizes
/// every width either way.
pub fn embedding_sweep(
    profile: Profile,
    options: SchemaOptions,
    dims: &[usize],
    cfg: &TrainConfig,
    samples: &[Sample<f32>],
    out_root: &Path,
) -> S2iResult<Vec<(usize, S2iResult<SweepRun>)>> {
    if dims.is_empty() {
        return Err(S2iError::Config("sweep needs at least one embedding width".into()));
    }
    if let Some(&f) = dims.iter().find(|f| !profile.f_sweep().contains(f)) {
        return Err(S2iError::Config(format!(
            "embedding width {f} is not valid for this profile (allowed: {:?})",
            profile.f_sweep()
        )));
    }
    fs::create_dir_all(out_root).map_err(|e| S2iError::io(out_root.display().to_string(), e))?;

    let mut results = Vec::with_capacity(dims.len());
    let mut summary = String::from("f,status,final_l_a,final_l_g_pixel,final_l_g_ma_adv\n");
    for &f in dims {
        let run_dir = out_root.join(format!("f{f:04}"));
        let result = run_one(profile, options, f, cfg, samples, &run_dir);
        match &result {
            Ok(run) => {
                let l_a = run.ae_ledger.epochs.last().and_then(|e| e.l_a);
                let (pix, ma) = run
                    .gan_ledger
                    .epochs
                    .last()
                    .map(|e| (e.l_g_pixel, e.l_g_ma))
                    .unwrap_or((None, None));
                let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                writeln!(summary, "{f},ok,{},{},{}", cell(l_a), cell(pix), cell(ma)).unwrap();
            }
            Err(e) => {
                // Commas in the message would shift CSV columns.
                let msg = e.to_string().replace([',', '\n'], ";");
                writeln!(summary, "{f},error: {msg},,,").unwrap();
            }
        }
        results.push((f, result));
    }
    let path = out_root.join("sweep.csv");
    fs::write(&path, summary).map_err(|e| S2iError::io(path.display().to_string(), e))?;
    Ok(results)
}
