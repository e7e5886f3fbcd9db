//! End-to-end checks of the binary: exit codes, artifact layout, and
//! byte-level determinism of the data pipeline.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn s2i(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2i"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_subcommand_and_key_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2i(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = s2i(&["synth-data", "--bogus_key", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kind=usage"), "stderr: {err}");

    let out = s2i(&["synth-data", "--seed"], dir.path());
    assert_eq!(out.status.code(), Some(2), "missing value is a usage error");
}

#[test]
fn help_prints_key_table_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2i(&["train-gan", "--help"], dir.path());
    assert_ok(&out, "train-gan --help");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("--n_gd"), "stdout: {text}");
    assert!(text.contains("--lambda"));
}

#[test]
fn version_is_git_describable() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2i(&["--version"], dir.path());
    assert_ok(&out, "--version");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("s2i "), "stdout: {text}");
    assert!(text.contains('('), "version string carries a git describe: {text}");
}

#[test]
fn synth_data_is_byte_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = s2i(
            &[
                "synth-data",
                "--data_dir",
                name,
                "--scenes",
                "3",
                "--segments",
                "2",
                "--seed",
                "7",
            ],
            dir.path(),
        );
        assert_ok(&out, "synth-data");
    }
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let manifest_a = fs::read(a.join("manifest.jsonl")).unwrap();
    let manifest_b = fs::read(b.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest_a, manifest_b, "manifests differ across identical runs");
    assert_eq!(
        fs::read(a.join("splits").join("train.jsonl")).unwrap(),
        fs::read(b.join("splits").join("train.jsonl")).unwrap()
    );

    // every corpus payload file, byte for byte
    for sub in ["wav", "img"] {
        let mut names: Vec<String> = fs::read_dir(a.join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(
                fs::read(a.join(sub).join(&n)).unwrap(),
                fs::read(b.join(sub).join(&n)).unwrap(),
                "{sub}/{n} differs"
            );
        }
    }
}

#[test]
fn describe_prints_every_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2i(&["describe", "--profile", "tiny", "--f", "8"], dir.path());
    assert_ok(&out, "describe");
    let text = String::from_utf8_lossy(&out.stdout);
    for net in [
        "audio encoder",
        "audio decoder",
        "generator",
        "discriminator trunk",
        "discriminator head",
        "classifier",
        "total parameters",
    ] {
        assert!(text.contains(net), "describe output missing {net:?}: {text}");
    }
}

#[test]
fn pipeline_runs_end_to_end_on_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_ok(
        &s2i(
            &["synth-data", "--scenes", "5", "--segments", "2", "--seed", "3"],
            root,
        ),
        "synth-data",
    );
    assert_ok(&s2i(&["featurize"], root), "featurize");
    assert!(root.join("data").join("norm_stats").exists());
    assert!(root.join("data").join("config.txt").exists());

    assert_ok(
        &s2i(&["train-ae", "--ae_epochs", "2", "--seed", "3"], root),
        "train-ae",
    );
    let run = root.join("run");
    assert!(run.join("ae").join("ae_final.s2ic").exists());
    assert!(run.join("config.txt").exists());
    assert!(run.join("version.txt").exists());
    let ae_csv = fs::read_to_string(run.join("ae").join("ae_loss.csv")).unwrap();
    assert_eq!(ae_csv.lines().count(), 3, "header plus one line per epoch");

    assert_ok(
        &s2i(&["train-gan", "--gan_epochs", "2", "--seed", "3"], root),
        "train-gan",
    );
    assert!(run.join("gan").join("gan_final.s2ic").exists());
    assert!(run.join("gan").join("gan_loss.csv").exists());

    // effective config echoes the checkpoint-adopted embedding width
    let echoed = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(echoed.contains("\nf=8\n") || echoed.starts_with("f=8\n"), "{echoed}");

    let wav = fs::read_dir(root.join("data").join("wav"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "wav"))
        .expect("corpus has wav files");
    assert_ok(
        &s2i(
            &[
                "translate",
                "--sound",
                wav.to_str().unwrap(),
                "--samples",
                "2",
                "--dropout",
                "off",
            ],
            root,
        ),
        "translate",
    );
    assert!(run.join("translate").join("translation_00.png").exists());
    assert!(run.join("translate").join("translation_01.png").exists());
    let emb = fs::read_to_string(run.join("translate").join("embedding.csv")).unwrap();
    assert_eq!(emb.lines().next(), Some("dim,value"));
    assert_eq!(emb.lines().count(), 9, "header plus one row per embedding dim");

    assert_ok(&s2i(&["metrics", "--window", "1"], root), "metrics");
    let summary = fs::read_to_string(run.join("metrics").join("summary.csv")).unwrap();
    assert!(summary.starts_with("f,class,general_avg,max_ma50"), "{summary}");
}
