//! Evaluation commands: classifier training, held-out scoring, ledger reports.

use std::fs;
use std::path::{Path, PathBuf};

use s2i_core::data::{center_crop_resize, class_image_template, load_split, ncc, SplitManifest};
use s2i_core::eval::{
    assemble_dataset, emit_report, informativity_rate, load_classifier, template_contrast,
    train_informativity_classifier, translate_sounds, save_classifier, ClassifierConfig,
    DimensionReport, LabeledImage, MaskRule,
};
use s2i_core::io::{load_rgb8, read_checkpoint};
use s2i_core::models::{ModelSchema, SchemaOptions};
use s2i_core::nn::Tensor;
use s2i_core::training::load_gan_nets;

use crate::config::Resolved;
use crate::data::{read_class_names, read_split, read_stats_required, stats_path, synth_config};
use crate::{log, usage, write_run_preamble, CliError};

/// Clean per-class template images in sorted-class order, rendered at the
/// classifier input size. Labels must follow the synthetic class_<k> scheme.
fn class_templates(
    r: &Resolved,
    classes: &[String],
    target: usize,
) -> Result<Vec<Tensor<f32>>, CliError> {
    let cfg = synth_config(r, classes.len())?;
    let mut out = Vec::with_capacity(classes.len());
    for name in classes {
        let k: usize = name
            .strip_prefix("class_")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                CliError::Runtime(format!(
                    "class label {name:?} has no template; template scoring needs class_<k> labels"
                ))
            })?;
        out.push(class_image_template::<f32>(&cfg, k, target)?);
    }
    Ok(out)
}

fn argmax_ncc(img: &Tensor<f32>, templates: &[Tensor<f32>]) -> usize {
    let a: Vec<f64> = img.data().iter().map(|&v| f64::from(v)).collect();
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, t) in templates.iter().enumerate() {
        let b: Vec<f64> = t.data().iter().map(|&v| f64::from(v)).collect();
        let score = ncc(&a, &b);
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// Every segment image of a split, cropped to the model input size, paired
/// with its class index.
fn split_images(
    split: &SplitManifest,
    data_dir: &Path,
    classes: &[String],
    target: usize,
) -> Result<Vec<(usize, Tensor<f32>)>, CliError> {
    let mut out = Vec::new();
    for entry in &split.entries {
        let class_idx = classes
            .iter()
            .position(|c| *c == entry.class_label)
            .ok_or_else(|| {
                CliError::Runtime(format!("class {} missing from class list", entry.class_label))
            })?;
        for seg in &entry.segments {
            let (w, h, pixels) = load_rgb8(&data_dir.join(&seg.image_path))?;
            let img = center_crop_resize::<f32>(w as usize, h as usize, &pixels, target)?;
            out.push((class_idx, img));
        }
    }
    Ok(out)
}

pub fn train_clf(r: &mut Resolved) -> Result<(), CliError> {
    let run_dir = r.path("run_dir")?;
    let data_dir = r.path("data_dir")?;
    r.default_empty("clf_dir", run_dir.join("clf").display().to_string());
    r.default_empty(
        "checkpoint",
        run_dir.join("gan").join("gan_final.s2ic").display().to_string(),
    );
    let clf_dir = r.path("clf_dir")?;
    let ckpt = r.path("checkpoint")?;
    let use_translations = r.bool("use_translations")?;

    // A present translator checkpoint pins the schema so later evaluation
    // sees classifier and translator agree; otherwise build from the keys.
    let mut gan_state = None;
    let schema = if ckpt.exists() {
        let st = load_gan_nets(&ckpt)?;
        r.adopt_schema(st.schema.profile, st.schema.f)?;
        let schema = st.schema.clone();
        gan_state = Some(st);
        schema
    } else if use_translations {
        return Err(CliError::Runtime(format!(
            "use_translations needs a translator checkpoint at {}",
            ckpt.display()
        )));
    } else {
        ModelSchema::new(r.profile()?, r.usize("f")?, SchemaOptions {
            inner_act: r.inner_act()?,
            dropout_p: r.f64("dropout_p")?,
        })
        .map_err(usage)?
    };
    let sp = stats_path(r, &run_dir, &data_dir);
    r.default_empty("stats", sp.display().to_string());
    write_run_preamble(&run_dir, r)?;

    let target = schema.profile.image_size();
    let classes = read_class_names(&data_dir)?;
    let train = read_split(&data_dir, "train")?;
    let real = split_images(&train, &data_dir, &classes, target)?;

    // Optional second source: the translator's own outputs on training
    // sounds, labeled by nearest class template.
    let mut translated: Vec<(usize, Tensor<f32>)> = Vec::new();
    if use_translations {
        let dsp = r.frontend_config()?;
        dsp.validate().map_err(usage)?;
        let stats = read_stats_required(&sp)?;
        let samples =
            load_split::<f32>(&train, &data_dir, &dsp, stats, target, &classes)?;
        let specs: Vec<Tensor<f32>> = samples.iter().map(|s| s.spec.clone()).collect();
        let st = gan_state.as_mut().expect("checked above");
        let images = translate_sounds(
            &schema,
            &mut st.enc,
            &mut st.gen,
            &specs,
            r.usize("clf_batch_size")?,
            r.u64("seed")?,
        )?;
        let templates = class_templates(r, &classes, target)?;
        for img in images {
            let k = argmax_ncc(&img, &templates);
            translated.push((k, img));
        }
    }

    fs::create_dir_all(&clf_dir)?;
    let seed = r.u64("seed")?;
    let mut summary = String::from("class,holdout_accuracy,train_images,test_images\n");
    for (k, class) in classes.iter().enumerate() {
        let label = |items: &[(usize, Tensor<f32>)], model_id: &str| -> Vec<LabeledImage<f32>> {
            items
                .iter()
                .map(|(ci, img)| LabeledImage {
                    image: img.clone(),
                    informative: *ci == k,
                    model_id: model_id.to_string(),
                })
                .collect()
        };
        let mut sources = vec![("real".to_string(), label(&real, "real"))];
        if !translated.is_empty() {
            // A collapsed translator can label every output the same way; such
            // a source cannot be balanced, so train on real images alone.
            let hits = translated.iter().filter(|(ci, _)| *ci == k).count();
            if hits == 0 || hits == translated.len() {
                log(
                    "clf_source_skipped",
                    &[
                        ("class", class.clone()),
                        ("source", "translator".to_string()),
                        ("reason", "single_label".to_string()),
                    ],
                );
            } else {
                sources.push(("translator".to_string(), label(&translated, "translator")));
            }
        }
        let ds = assemble_dataset(class, sources, r.f64("train_frac")?, seed + k as u64)?;
        let cfg = ClassifierConfig {
            lr: r.f64("clf_lr")?,
            momentum: r.f64("clf_momentum")?,
            weight_decay: r.f64("clf_weight_decay")?,
            batch_size: r.usize("clf_batch_size")?,
            epochs: r.usize("clf_epochs")?,
            seed: seed + k as u64,
            balance_tolerance: r.usize("balance_tolerance")?,
        };
        let mut clf = train_informativity_classifier(&schema, &ds, &cfg)?;
        save_classifier(&clf_dir.join(format!("clf_{class}.s2ic")), &schema, &mut clf, &cfg)?;
        summary.push_str(&format!(
            "{class},{},{},{}\n",
            clf.holdout_accuracy,
            ds.train.len(),
            ds.test.len()
        ));
        log(
            "train_clf",
            &[
                ("class", class.clone()),
                ("holdout_accuracy", clf.holdout_accuracy.to_string()),
                ("train_images", ds.train.len().to_string()),
                ("test_images", ds.test.len().to_string()),
            ],
        );
    }
    fs::write(clf_dir.join("clf_summary.csv"), summary)?;
    Ok(())
}

pub fn eval(r: &mut Resolved) -> Result<(), CliError> {
    let run_dir = r.path("run_dir")?;
    let data_dir = r.path("data_dir")?;
    r.default_empty(
        "checkpoint",
        run_dir.join("gan").join("gan_final.s2ic").display().to_string(),
    );
    r.default_empty("clf_dir", run_dir.join("clf").display().to_string());
    let clf_dir = r.path("clf_dir")?;
    let mut state = load_gan_nets(&r.path("checkpoint")?)?;
    r.adopt_schema(state.schema.profile, state.schema.f)?;
    let dsp = r.frontend_config()?;
    dsp.validate().map_err(usage)?;
    let sp = stats_path(r, &run_dir, &data_dir);
    r.default_empty("stats", sp.display().to_string());
    write_run_preamble(&run_dir, r)?;

    let stats = read_stats_required(&sp)?;
    let classes = read_class_names(&data_dir)?;
    let test = read_split(&data_dir, "test")?;
    let target = state.schema.profile.image_size();
    let samples = load_split::<f32>(&test, &data_dir, &dsp, stats, target, &classes)?;
    if samples.is_empty() {
        return Err(CliError::Runtime("test split has no segments".into()));
    }

    let mut classifiers = Vec::with_capacity(classes.len());
    for class in &classes {
        let path = clf_dir.join(format!("clf_{class}.s2ic"));
        if !path.exists() {
            return Err(CliError::Runtime(format!(
                "no classifier for class {class} at {}; run train-clf first",
                path.display()
            )));
        }
        let (cschema, clf, _cfg) = load_classifier(&path)?;
        if cschema.profile != state.schema.profile || cschema.classifier != state.schema.classifier
        {
            return Err(CliError::Runtime(format!(
                "classifier {} was trained against a different schema; rerun train-clf",
                path.display()
            )));
        }
        classifiers.push(clf);
    }

    let sounds: Vec<(Tensor<f32>, usize)> =
        samples.iter().map(|s| (s.spec.clone(), s.class_idx)).collect();
    let batch = r.usize("batch_size")?;
    let seed = r.u64("seed")?;
    let report = informativity_rate(
        &state.schema,
        &mut state.enc,
        &mut state.gen,
        &sounds,
        &mut classifiers,
        batch,
        seed,
    )?;

    let out_dir = run_dir.join("eval");
    fs::create_dir_all(&out_dir)?;
    let mut csv = String::from("class,rate\n");
    for (name, rate) in &report.per_class {
        csv.push_str(&format!("{name},{rate}\n"));
    }
    csv.push_str(&format!("macro_avg,{}\n", report.macro_avg));
    fs::write(out_dir.join("informativity.csv"), csv)?;

    let specs: Vec<Tensor<f32>> = sounds.iter().map(|(s, _)| s.clone()).collect();
    let labels: Vec<usize> = sounds.iter().map(|&(_, k)| k).collect();
    let images = translate_sounds(
        &state.schema,
        &mut state.enc,
        &mut state.gen,
        &specs,
        batch,
        seed,
    )?;
    let templates = class_templates(r, &classes, target)?;
    let contrast = template_contrast(
        &images,
        &labels,
        &templates,
        r.usize("n_permutations")?,
        seed,
    )?;
    fs::write(
        out_dir.join("contrast.csv"),
        format!(
            "observed,p_value,n_permutations\n{},{},{}\n",
            contrast.observed, contrast.p_value, contrast.n_permutations
        ),
    )?;
    log(
        "eval",
        &[
            ("sounds", sounds.len().to_string()),
            ("macro_avg", report.macro_avg.to_string()),
            ("contrast", contrast.observed.to_string()),
            ("p_value", contrast.p_value.to_string()),
            ("out_dir", out_dir.display().to_string()),
        ],
    );
    Ok(())
}

fn parse_gan_csv(path: &Path) -> Result<(Vec<f64>, Vec<usize>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Runtime(format!("{}: {e}; run train-gan first", path.display()))
    })?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "epoch,l_g_pixel,l_g_adv,l_g_ma_adv,l_d" {
        return Err(CliError::Runtime(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut pixel = Vec::new();
    let mut d_epochs = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| {
            CliError::Runtime(format!("{}:{}: bad {what} in {line:?}", path.display(), i + 2))
        };
        if cells.len() != 5 {
            return Err(bad("row"));
        }
        let epoch: usize = cells[0].parse().map_err(|_| bad("epoch"))?;
        pixel.push(cells[1].parse::<f64>().map_err(|_| bad("l_g_pixel"))?);
        if !cells[4].is_empty() {
            d_epochs.push(epoch);
        }
    }
    Ok((pixel, d_epochs))
}

/// epoch,<class>,<class>,... with one complete f64 column per class.
fn parse_informativity(path: &Path) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Runtime(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"epoch") || cols.len() < 2 {
        return Err(CliError::Runtime(format!(
            "{}: expected header epoch,<class>,..., got {header:?}",
            path.display()
        )));
    }
    let mut series: Vec<(String, Vec<f64>)> =
        cols[1..].iter().map(|c| (c.to_string(), Vec::new())).collect();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(CliError::Runtime(format!(
                "{}:{}: expected {} cells, got {}",
                path.display(),
                i + 2,
                cols.len(),
                cells.len()
            )));
        }
        for (j, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Runtime(format!(
                    "{}:{}: bad rate {cell:?}",
                    path.display(),
                    i + 2
                ))
            })?;
            series[j].1.push(v);
        }
    }
    Ok(series)
}

pub fn metrics(r: &mut Resolved) -> Result<(), CliError> {
    let run_dir = r.path("run_dir")?;
    r.default_empty(
        "checkpoint",
        run_dir.join("gan").join("gan_final.s2ic").display().to_string(),
    );
    let window = r.usize("window")?;
    let start = r.usize("range_start")?;
    let end_key = r.usize("range_end")?;
    let rule = match r.get("mask") {
        "disabled" => MaskRule::disabled(),
        "epoch_cadence" => MaskRule::epoch_cadence(),
        other => {
            return Err(CliError::Usage(format!(
                "key mask: expected disabled or epoch_cadence, got {other:?}"
            )))
        }
    };
    write_run_preamble(&run_dir, r)?;

    let (pixel, d_epochs) = parse_gan_csv(&run_dir.join("gan").join("gan_loss.csv"))?;
    let f = if r.is_explicit("f") {
        r.usize("f")?
    } else {
        let ckpt = PathBuf::from(r.get("checkpoint"));
        if ckpt.exists() {
            ModelSchema::from_json(&read_checkpoint(&ckpt)?.schema_json)?.f
        } else {
            0
        }
    };
    let informativity = match r.get("informativity_csv") {
        "" => Vec::new(),
        path => parse_informativity(Path::new(path))?,
    };

    let end = if end_key == 0 { pixel.len() } else { end_key };
    let epochs = pixel.len();
    let report = DimensionReport {
        f,
        pixel_loss: pixel,
        informativity,
        d_update_epochs: d_epochs,
    };
    let out_dir = run_dir.join("metrics");
    emit_report(&[report], window, (start, end), &rule, &out_dir)?;
    log(
        "metrics",
        &[
            ("epochs", epochs.to_string()),
            ("f", f.to_string()),
            ("window", window.to_string()),
            ("out_dir", out_dir.display().to_string()),
        ],
    );
    Ok(())
}
