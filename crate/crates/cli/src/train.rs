//! Training commands: autoencoder, adversarial translator, embedding sweep.

use std::path::PathBuf;

use s2i_core::data::{load_split, Sample};
use s2i_core::models::{ModelSchema, SchemaOptions};
use s2i_core::training::{
    embedding_sweep, load_ae_nets, load_run_state, resume_gan, train_autoencoder, train_gan,
};

use crate::config::Resolved;
use crate::data::{ensure_stats, read_class_names, read_split, stats_path};
use crate::{log, usage, write_run_preamble, CliError};

fn schema_options(r: &Resolved) -> Result<SchemaOptions, CliError> {
    Ok(SchemaOptions {
        inner_act: r.inner_act()?,
        dropout_p: r.f64("dropout_p")?,
    })
}

/// Loads the training split with stats resolved (and computed if absent).
/// Assumes the stats key has already been materialized into `r`.
fn load_train_samples(r: &Resolved) -> Result<Vec<Sample<f32>>, CliError> {
    let data_dir = r.path("data_dir")?;
    let dsp = r.frontend_config()?;
    dsp.validate().map_err(usage)?;
    let train = read_split(&data_dir, "train")?;
    let stats = ensure_stats(&r.path("stats")?, &train, &data_dir, &dsp)?;
    let classes = read_class_names(&data_dir)?;
    let profile = r.profile()?;
    let samples = load_split::<f32>(
        &train,
        &data_dir,
        &dsp,
        stats,
        profile.image_size(),
        &classes,
    )?;
    log(
        "load_split",
        &[
            ("split", "train".into()),
            ("samples", samples.len().to_string()),
            ("classes", classes.len().to_string()),
        ],
    );
    Ok(samples)
}

pub fn train_ae(r: &mut Resolved) -> Result<(), CliError> {
    let run_dir = r.path("run_dir")?;
    let data_dir = r.path("data_dir")?;
    let profile = r.profile()?;
    r.frontend_config()?.validate().map_err(usage)?;
    let schema = ModelSchema::new(profile, r.usize("f")?, schema_options(r)?).map_err(usage)?;
    let cfg = r.train_config()?;
    cfg.validate().map_err(usage)?;

    let sp = stats_path(r, &run_dir, &data_dir);
    r.default_empty("stats", sp.display().to_string());
    write_run_preamble(&run_dir, r)?;

    let samples = load_train_samples(r)?;
    let out = train_autoencoder(&schema, &cfg, &samples, &run_dir.join("ae"))?;
    let final_l_a = out.ledger.epochs.last().and_then(|e| e.l_a);
    log(
        "train_ae",
        &[
            ("epochs", out.ledger.epochs.len().to_string()),
            ("final_l_a", final_l_a.map(|v| v.to_string()).unwrap_or_default()),
            ("checkpoint", out.final_checkpoint.display().to_string()),
        ],
    );
    Ok(())
}

pub fn train_gan_cmd(r: &mut Resolved) -> Result<(), CliError> {
    let run_dir = r.path("run_dir")?;
    let data_dir = r.path("data_dir")?;
    let gan_dir = run_dir.join("gan");

    let resume = r.get("resume").to_string();
    let out = if !resume.is_empty() {
        let path = PathBuf::from(&resume);
        let (ckpt, meta) = load_run_state(&path)?;
        let schema = ModelSchema::from_json(&ckpt.schema_json)?;
        r.adopt_schema(schema.profile, schema.f)?;
        let sp = stats_path(r, &run_dir, &data_dir);
        r.default_empty("stats", sp.display().to_string());
        write_run_preamble(&run_dir, r)?;

        let samples = load_train_samples(r)?;
        // Only run-length keys may override a resumed config; everything
        // else must come from the checkpoint or the resume would diverge.
        let wants_override = r.is_explicit("gan_epochs")
            || r.is_explicit("gan_iterations")
            || r.is_explicit("checkpoint_every");
        let override_cfg = if wants_override {
            let mut c = meta.config.clone();
            if r.is_explicit("gan_epochs") {
                c.gan_epochs = r.usize("gan_epochs")?;
            }
            if r.is_explicit("gan_iterations") {
                c.gan_iterations = r.opt_u64("gan_iterations")?;
            }
            if r.is_explicit("checkpoint_every") {
                c.checkpoint_every = r.usize("checkpoint_every")?;
            }
            Some(c)
        } else {
            None
        };
        resume_gan(&path, &samples, &gan_dir, override_cfg.as_ref())?
    } else {
        r.default_empty(
            "init_checkpoint",
            run_dir.join("ae").join("ae_final.s2ic").display().to_string(),
        );
        let init = r.path("init_checkpoint")?;
        let (schema, enc, _dec, _meta) = load_ae_nets(&init)?;
        r.adopt_schema(schema.profile, schema.f)?;
        let cfg = r.train_config()?;
        cfg.validate().map_err(usage)?;
        let sp = stats_path(r, &run_dir, &data_dir);
        r.default_empty("stats", sp.display().to_string());
        write_run_preamble(&run_dir, r)?;

        let samples = load_train_samples(r)?;
        train_gan(&schema, &cfg, &samples, enc, &gan_dir)?
    };

    let last = out.ledger.epochs.last();
    log(
        "train_gan",
        &[
            ("epochs", out.ledger.epochs.len().to_string()),
            ("g_updates", out.ledger.g_update_count().to_string()),
            ("d_updates", out.ledger.d_update_count().to_string()),
            (
                "final_l_g_pixel",
                last.and_then(|e| e.l_g_pixel).map(|v| v.to_string()).unwrap_or_default(),
            ),
            (
                "final_l_g_ma_adv",
                last.and_then(|e| e.l_g_ma).map(|v| v.to_string()).unwrap_or_default(),
            ),
            ("checkpoint", out.final_checkpoint.display().to_string()),
        ],
    );
    Ok(())
}

pub fn sweep(r: &mut Resolved) -> Result<(), CliError> {
    let run_dir = r.path("run_dir")?;
    let data_dir = r.path("data_dir")?;
    let profile = r.profile()?;
    let dims: Vec<usize> = if r.get("f_list").is_empty() {
        profile.f_sweep().to_vec()
    } else {
        r.get("f_list")
            .split(',')
            .map(|t| {
                t.trim().parse::<usize>().map_err(|_| {
                    CliError::Usage(format!("key f_list: expected comma-separated widths, got {t:?}"))
                })
            })
            .collect::<Result<_, _>>()?
    };
    let options = schema_options(r)?;
    let cfg = r.train_config()?;
    cfg.validate().map_err(usage)?;

    let sp = stats_path(r, &run_dir, &data_dir);
    r.default_empty("stats", sp.display().to_string());
    write_run_preamble(&run_dir, r)?;

    let samples = load_train_samples(r)?;
    let results = embedding_sweep(profile, options, &dims, &cfg, &samples, &run_dir.join("sweep"))
        .map_err(usage)?;

    let mut failed = 0usize;
    for (f, res) in &results {
        match res {
            Ok(run) => {
                let last = run.gan_ledger.epochs.last();
                log(
                    "sweep_run",
                    &[
                        ("f", f.to_string()),
                        ("status", "ok".into()),
                        (
                            "final_l_g_pixel",
                            last.and_then(|e| e.l_g_pixel)
                                .map(|v| v.to_string())
                                .unwrap_or_default(),
                        ),
                    ],
                );
            }
            Err(e) => {
                failed += 1;
                log(
                    "sweep_run",
                    &[
                        ("f", f.to_string()),
                        ("status", "error".into()),
                        ("msg", e.to_string()),
                    ],
                );
            }
        }
    }
    log(
        "sweep",
        &[
            ("widths", results.len().to_string()),
            ("failed", failed.to_string()),
        ],
    );
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} sweep widths failed")));
    }
    Ok(())
}
