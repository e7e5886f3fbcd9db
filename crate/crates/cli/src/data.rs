//! Corpus commands and the split/stats plumbing the other commands share.
//!
//! Split manifests persist as scene JSON-lines under data_dir/splits, the
//! same format as the corpus manifest, so the split files stay greppable and
//! the loader conversion is field-for-field.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use s2i_core::data::{
    build_splits, class_names, read_manifest, split_norm_stats, synth_dataset, write_manifest,
    SceneRecord, SplitEntry, SplitManifest, SynthConfig, SPLIT_NAMES,
};
use s2i_core::dsp::{log_mel_spectrogram, normalize_spectrogram, FrontendConfig, NormStats};
use s2i_core::io::{read_norm_stats, read_wav_mono, write_norm_stats, write_spectrogram};

use crate::config::Resolved;
use crate::{log, usage, write_run_preamble, CliError};

fn split_path(data_dir: &Path, name: &str) -> PathBuf {
    data_dir.join("splits").join(format!("{name}.jsonl"))
}

pub fn write_split(data_dir: &Path, split: &SplitManifest) -> Result<(), CliError> {
    let records: Vec<SceneRecord> = split
        .entries
        .iter()
        .map(|e| SceneRecord {
            scene_id: e.scene_id.clone(),
            class_label: e.class_label.clone(),
            segments: e.segments.clone(),
        })
        .collect();
    write_manifest(&split_path(data_dir, &split.name), &records)?;
    Ok(())
}

pub fn read_split(data_dir: &Path, name: &str) -> Result<SplitManifest, CliError> {
    let path = split_path(data_dir, name);
    if !path.exists() {
        return Err(CliError::Runtime(format!(
            "missing split manifest {}; run synth-data first",
            path.display()
        )));
    }
    let records = read_manifest(&path)?;
    Ok(SplitManifest {
        name: name.to_string(),
        entries: records
            .into_iter()
            .map(|s| SplitEntry {
                scene_id: s.scene_id,
                class_label: s.class_label,
                segments: s.segments,
            })
            .collect(),
    })
}

/// Class index order must agree across commands, so names always come from
/// every split that exists, not just the one being loaded.
pub fn read_class_names(data_dir: &Path) -> Result<Vec<String>, CliError> {
    let mut splits = Vec::new();
    for name in SPLIT_NAMES {
        if split_path(data_dir, name).exists() {
            splits.push(read_split(data_dir, name)?);
        }
    }
    if splits.is_empty() {
        return Err(CliError::Runtime(format!(
            "no split manifests under {}; run synth-data first",
            data_dir.join("splits").display()
        )));
    }
    let refs: Vec<&SplitManifest> = splits.iter().collect();
    Ok(class_names(&refs))
}

/// Where this run should look for normalization stats: an explicit key wins,
/// then an existing run_dir/norm_stats, then data_dir/norm_stats, and
/// otherwise run_dir/norm_stats as the place to create them.
pub fn stats_path(r: &Resolved, run_dir: &Path, data_dir: &Path) -> PathBuf {
    let explicit = r.get("stats");
    if !explicit.is_empty() {
        return PathBuf::from(explicit);
    }
    let run_stats = run_dir.join("norm_stats");
    if run_stats.exists() {
        return run_stats;
    }
    let data_stats = data_dir.join("norm_stats");
    if data_stats.exists() {
        return data_stats;
    }
    run_stats
}

/// Training commands may compute stats from the train split when none exist.
pub fn ensure_stats(
    path: &Path,
    train: &SplitManifest,
    data_dir: &Path,
    dsp: &FrontendConfig,
) -> Result<NormStats, CliError> {
    if path.exists() {
        return Ok(read_norm_stats(path)?);
    }
    let stats = split_norm_stats(train, data_dir, dsp)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    write_norm_stats(path, stats)?;
    log(
        "norm_stats",
        &[
            ("path", path.display().to_string()),
            ("min", stats.min.to_string()),
            ("max", stats.max.to_string()),
        ],
    );
    Ok(stats)
}

/// Inference commands never invent stats; mismatched stats would silently
/// shift every translation.
pub fn read_stats_required(path: &Path) -> Result<NormStats, CliError> {
    if !path.exists() {
        return Err(CliError::Runtime(format!(
            "no normalization stats at {}; run featurize or train-ae first, or pass --stats",
            path.display()
        )));
    }
    Ok(read_norm_stats(path)?)
}

pub fn synth_config(r: &Resolved, n_classes: usize) -> Result<SynthConfig, CliError> {
    Ok(SynthConfig {
        n_classes,
        scenes_per_class: r.usize("scenes")?,
        segments_per_scene: r.usize("segments")?,
        sample_rate: r.u32("sample_rate")?,
        segment_secs: r.f64("segment_secs")?,
        noise_level: r.f64("noise")?,
        position_jitter: r.f64("position_jitter")?,
        hue_jitter: r.f64("hue_jitter")?,
        render_size: r.usize("render_size")?,
        seed: r.u64("seed")?,
    })
}

pub fn synth_data(r: &mut Resolved) -> Result<(), CliError> {
    let data_dir = r.path("data_dir")?;
    let cfg = synth_config(r, r.usize("classes")?)?;
    cfg.validate().map_err(usage)?;
    let ratios = [
        r.f64("ratio_train")?,
        r.f64("ratio_val")?,
        r.f64("ratio_test")?,
    ];
    write_run_preamble(&data_dir, r)?;

    let scenes = synth_dataset(&cfg, &data_dir)?;
    write_manifest(&data_dir.join("manifest.jsonl"), &scenes)?;
    let splits = build_splits(&scenes, ratios, r.u64("seed")?).map_err(usage)?;
    fs::create_dir_all(data_dir.join("splits"))?;
    let mut fields = vec![
        ("classes", cfg.n_classes.to_string()),
        ("scenes", scenes.len().to_string()),
    ];
    for split in &splits {
        write_split(&data_dir, split)?;
        fields.push((
            match split.name.as_str() {
                "train" => "train",
                "val" => "val",
                _ => "test",
            },
            split.segment_count().to_string(),
        ));
    }
    log("synth_data", &fields);
    Ok(())
}

fn featurize_one(
    audio: &Path,
    out: &Path,
    dsp: &FrontendConfig,
    stats: NormStats,
) -> Result<bool, CliError> {
    let (samples, sr) = read_wav_mono(audio)?;
    if sr != dsp.sample_rate {
        return Err(CliError::Runtime(format!(
            "{}: sample rate {sr} != configured {}",
            audio.display(),
            dsp.sample_rate
        )));
    }
    let raw = log_mel_spectrogram(&samples, dsp)?;
    let (norm, clipped) = normalize_spectrogram(&raw, stats);
    write_spectrogram(out, &norm)?;
    Ok(clipped)
}

pub fn featurize(r: &mut Resolved) -> Result<(), CliError> {
    let data_dir = r.path("data_dir")?;
    let dsp = r.frontend_config()?;
    dsp.validate().map_err(usage)?;
    let jobs = r.usize("jobs")?.max(1);
    write_run_preamble(&data_dir, r)?;

    let scenes = read_manifest(&data_dir.join("manifest.jsonl"))?;
    let train = read_split(&data_dir, "train")?;
    let stats = split_norm_stats(&train, &data_dir, &dsp)?;
    write_norm_stats(&data_dir.join("norm_stats"), stats)?;

    let spec_dir = data_dir.join("spec");
    fs::create_dir_all(&spec_dir)?;
    let work: Vec<(PathBuf, PathBuf)> = scenes
        .iter()
        .flat_map(|s| {
            s.segments.iter().map(|g| {
                let stem = Path::new(&g.audio_path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_else(|| g.audio_path.replace('/', "_"));
                (data_dir.join(&g.audio_path), spec_dir.join(format!("{stem}.s2is")))
            })
        })
        .collect();

    // Items are independent and land in per-segment files, so worker count
    // affects wall time only, never output bytes.
    let clipped = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| -> Result<(), CliError> {
        let mut handles = Vec::new();
        for _ in 0..jobs.min(work.len().max(1)) {
            handles.push(scope.spawn(|| -> Result<(), CliError> {
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= work.len() {
                        return Ok(());
                    }
                    let (audio, out) = &work[i];
                    if featurize_one(audio, out, &dsp, stats)? {
                        clipped.fetch_add(1, Ordering::Relaxed);
                    }
                }
            }));
        }
        for h in handles {
            h.join().expect("featurize worker panicked")?;
        }
        Ok(())
    })?;

    log(
        "featurize",
        &[
            ("segments", work.len().to_string()),
            ("clipped", clipped.load(Ordering::Relaxed).to_string()),
            ("jobs", jobs.to_string()),
            ("stats_min", stats.min.to_string()),
            ("stats_max", stats.max.to_string()),
        ],
    );
    Ok(())
}
