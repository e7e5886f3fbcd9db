//! One flat key namespace shared by the config file and `--key value`
//! overrides. Precedence: command line > file > default. Unknown keys are
//! errors wherever they appear; profile-derived defaults fill in last.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use s2i_core::dsp::FrontendConfig;
use s2i_core::models::Profile;
use s2i_core::nn::Activation;
use s2i_core::training::{LrStep, NgdUnit, TrainConfig};

use crate::CliError;

pub enum Def {
    Static(&'static str),
    /// Filled from the resolved profile after merging.
    Profile,
    /// Stays empty unless set; commands supply contextual defaults.
    Empty,
}

pub struct KeySpec {
    pub name: &'static str,
    pub default: Def,
    pub help: &'static str,
}

macro_rules! keys {
    ($(($name:literal, $def:expr, $help:literal),)*) => {
        &[ $(KeySpec { name: $name, default: $def, help: $help }),* ]
    };
}

pub const KEYS: &[KeySpec] = keys![
    ("profile", Def::Static("tiny"), "model and frontend scale: tiny or reference"),
    ("seed", Def::Static("0"), "master seed for corpus, initialization and data order"),
    ("data_dir", Def::Static("data"), "corpus directory: manifest, wav, img, splits"),
    ("run_dir", Def::Static("run"), "output directory for this run's artifacts"),
    ("config", Def::Empty, "key=value file applied before command-line overrides"),
    ("jobs", Def::Static("1"), "worker threads for data preparation only"),
    ("classes", Def::Static("2"), "number of sound classes to synthesize"),
    ("scenes", Def::Static("10"), "scenes per class"),
    ("segments", Def::Static("3"), "segments per scene"),
    ("segment_secs", Def::Static("1.0"), "segment length in seconds"),
    ("noise", Def::Static("0.1"), "uniform audio noise amplitude"),
    ("position_jitter", Def::Static("5.0"), "max shape offset from image center, pixels"),
    ("hue_jitter", Def::Static("18.0"), "max per-scene hue shift, degrees"),
    ("render_size", Def::Profile, "synthetic PNG side length, pixels"),
    ("ratio_train", Def::Static("0.6"), "train split fraction"),
    ("ratio_val", Def::Static("0.2"), "validation split fraction"),
    ("ratio_test", Def::Static("0.2"), "test split fraction"),
    ("sample_rate", Def::Profile, "audio sample rate, Hz"),
    ("frame_len_ms", Def::Profile, "analysis frame length, ms"),
    ("hop_ms", Def::Profile, "frame hop, ms"),
    ("n_mels", Def::Profile, "mel bands"),
    ("fft_size", Def::Profile, "FFT size, power of two"),
    ("mel_fmin", Def::Static("0.0"), "lowest mel filter edge, Hz"),
    ("mel_fmax", Def::Profile, "highest mel filter edge, Hz"),
    ("log_floor", Def::Static("1e-10"), "power floor before the log"),
    ("f", Def::Profile, "audio embedding width"),
    ("inner_act", Def::Static("relu"), "inner activation: relu or tanh"),
    ("dropout_p", Def::Static("0.5"), "dropout probability in decoder and generator"),
    ("batch_size", Def::Profile, "training batch size"),
    ("ae_epochs", Def::Profile, "autoencoder epochs"),
    ("gan_epochs", Def::Profile, "adversarial epochs"),
    ("gan_iterations", Def::Empty, "hard iteration cap; overrides gan_epochs"),
    ("n_gd", Def::Static("5"), "discriminator update cadence"),
    ("n_gd_unit", Def::Static("iteration"), "cadence unit: iteration or epoch"),
    ("lambda", Def::Static("0.1"), "adversarial weight in the generator loss"),
    ("ma_k", Def::Static("5"), "epochs in the adversarial moving average"),
    ("lr_ae", Def::Static("0.05"), "autoencoder learning rate"),
    ("momentum_ae", Def::Static("0.9"), "autoencoder momentum"),
    ("lr_gan", Def::Static("0.1"), "generator and discriminator learning rate"),
    ("momentum_gan", Def::Static("0.5"), "generator and discriminator momentum"),
    ("lr_step_every", Def::Static("0"), "decay the GAN learning rates every N epochs; 0 disables"),
    ("lr_step_decay", Def::Static("1.0"), "multiplicative learning-rate decay factor"),
    ("r_max", Def::Static("1.0"), "discriminator target for real, coherent pairs"),
    ("r_min", Def::Static("-1.0"), "discriminator target for synthetic pairs"),
    ("checkpoint_every", Def::Static("10"), "epochs between checkpoints; 0 = final only"),
    ("init_checkpoint", Def::Empty, "autoencoder checkpoint seeding the GAN (default run_dir/ae/ae_final.s2ic)"),
    ("checkpoint", Def::Empty, "trained translator checkpoint (default run_dir/gan/gan_final.s2ic)"),
    ("resume", Def::Empty, "GAN checkpoint to resume training from"),
    ("stats", Def::Empty, "normalization stats file (default run_dir/norm_stats, else data_dir/norm_stats)"),
    ("f_list", Def::Empty, "comma-separated embedding widths to sweep (default: full profile sweep)"),
    ("sound", Def::Empty, "input WAV file to translate"),
    ("samples", Def::Static("4"), "translations to draw per sound"),
    ("dropout", Def::Static("on"), "translation-time dropout: on or off"),
    ("clf_dir", Def::Empty, "informativity classifier directory (default run_dir/clf)"),
    ("clf_lr", Def::Static("0.001"), "classifier learning rate"),
    ("clf_momentum", Def::Static("0.9"), "classifier momentum"),
    ("clf_weight_decay", Def::Static("5e-5"), "classifier weight decay"),
    ("clf_epochs", Def::Profile, "classifier epochs"),
    ("clf_batch_size", Def::Profile, "classifier batch size"),
    ("train_frac", Def::Static("0.8"), "classifier train fraction of assembled images"),
    ("balance_tolerance", Def::Static("0"), "allowed label-count imbalance per split"),
    ("use_translations", Def::Static("false"), "add oracle-labeled translations to classifier data"),
    ("n_permutations", Def::Static("999"), "label permutations for the contrast test"),
    ("window", Def::Static("50"), "trailing moving-average window, epochs"),
    ("range_start", Def::Static("1"), "first epoch of the summary average"),
    ("range_end", Def::Static("0"), "last epoch of the summary average; 0 = final epoch"),
    ("mask", Def::Static("disabled"), "epoch mask rule: disabled or epoch_cadence"),
    ("informativity_csv", Def::Empty, "per-epoch informativity rates to fold into reports"),
];

fn profile_default(profile: Profile, key: &str) -> String {
    let dsp = match profile {
        Profile::Tiny => FrontendConfig::tiny(),
        Profile::Reference => FrontendConfig::reference(),
    };
    let train = match profile {
        Profile::Tiny => TrainConfig::tiny(0),
        Profile::Reference => TrainConfig::reference(0),
    };
    match key {
        "render_size" => match profile {
            Profile::Tiny => "48".into(),
            Profile::Reference => "128".into(),
        },
        "sample_rate" => dsp.sample_rate.to_string(),
        "frame_len_ms" => dsp.frame_len_ms.to_string(),
        "hop_ms" => dsp.hop_ms.to_string(),
        "n_mels" => dsp.n_mels.to_string(),
        "fft_size" => dsp.fft_size.to_string(),
        "mel_fmax" => dsp.mel_fmax.to_string(),
        "f" => profile.f_sweep()[0].to_string(),
        "batch_size" => train.batch_size.to_string(),
        "ae_epochs" => train.ae_epochs.to_string(),
        "gan_epochs" => train.gan_epochs.to_string(),
        "clf_epochs" => match profile {
            Profile::Tiny => "20".into(),
            Profile::Reference => "30".into(),
        },
        "clf_batch_size" => train.batch_size.to_string(),
        other => unreachable!("no profile default for key {other}"),
    }
}

pub struct Resolved {
    values: BTreeMap<&'static str, String>,
    explicit: BTreeSet<&'static str>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn spec_of(key: &str) -> Result<&'static KeySpec, CliError> {
    KEYS.iter()
        .find(|s| s.name == key)
        .ok_or_else(|| usage(format!("unknown key {key:?}; run with --help for the key table")))
}

/// Splits raw trailing tokens into (key, value) pairs. Accepts both
/// `--key value` and `--key=value`.
fn parse_pairs(tokens: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let Some(body) = tok.strip_prefix("--") else {
            return Err(usage(format!("expected --key, got {tok:?}")));
        };
        if let Some((k, v)) = body.split_once('=') {
            pairs.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| usage(format!("--{body} is missing its value")))?;
            pairs.push((body.to_string(), v.clone()));
        }
    }
    Ok(pairs)
}

fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(usage(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            )));
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn wants_help(tokens: &[String]) -> bool {
    tokens.iter().any(|t| t == "--help" || t == "-h")
}

pub fn print_key_help(command: &str, about: &str) {
    println!("s2i {command}: {about}");
    println!();
    println!("Usage: s2i {command} [--key value]...");
    println!();
    println!("Keys (command line overrides file overrides default):");
    for spec in KEYS {
        let default = match spec.default {
            Def::Static(v) => format!("default {v}"),
            Def::Profile => "default depends on profile".to_string(),
            Def::Empty => "unset by default".to_string(),
        };
        println!("  --{:<18} {} ({})", spec.name, spec.help, default);
    }
}

/// Merges defaults, the `--config` file and command-line pairs, then fills
/// profile-derived defaults for keys still unset.
pub fn resolve(tokens: &[String]) -> Result<Resolved, CliError> {
    let cli_pairs = parse_pairs(tokens)?;
    for (k, _) in &cli_pairs {
        spec_of(k)?;
    }

    let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
    for spec in KEYS {
        if let Def::Static(v) = spec.default {
            values.insert(spec.name, v.to_string());
        } else {
            values.insert(spec.name, String::new());
        }
    }
    let mut explicit = BTreeSet::new();

    if let Some((_, path)) = cli_pairs.iter().find(|(k, _)| k == "config") {
        for (k, v) in parse_config_file(Path::new(path))? {
            let spec = spec_of(&k)?;
            values.insert(spec.name, v);
            explicit.insert(spec.name);
        }
    }
    for (k, v) in cli_pairs {
        let spec = spec_of(&k)?;
        values.insert(spec.name, v);
        explicit.insert(spec.name);
    }

    let mut resolved = Resolved { values, explicit };
    let profile = resolved.profile()?;
    for spec in KEYS {
        if matches!(spec.default, Def::Profile) && resolved.values[spec.name].is_empty() {
            resolved
                .values
                .insert(spec.name, profile_default(profile, spec.name));
        }
    }
    Ok(resolved)
}

impl Resolved {
    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key {key} missing from table"))
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Fills an Empty-default key with a command-supplied context default.
    pub fn default_empty(&mut self, key: &'static str, value: String) {
        let slot = self
            .values
            .get_mut(key)
            .unwrap_or_else(|| panic!("key {key} missing from table"));
        if slot.is_empty() {
            *slot = value;
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T, CliError> {
        let raw = self.get(key);
        raw.parse::<T>()
            .map_err(|_| usage(format!("key {key}: expected {what}, got {raw:?}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn u32(&self, key: &str) -> Result<u32, CliError> {
        self.parse(key, "a nonnegative integer")
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.parse(key, "a number")
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            "true" | "on" | "1" => Ok(true),
            "false" | "off" | "0" => Ok(false),
            other => Err(usage(format!("key {key}: expected true or false, got {other:?}"))),
        }
    }

    /// Empty string means unset.
    pub fn opt_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        if self.get(key).is_empty() {
            Ok(None)
        } else {
            self.u64(key).map(Some)
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        let raw = self.get(key);
        if raw.is_empty() {
            return Err(usage(format!("key {key} is required")));
        }
        Ok(PathBuf::from(raw))
    }

    pub fn profile(&self) -> Result<Profile, CliError> {
        match self.get("profile") {
            "tiny" => Ok(Profile::Tiny),
            "reference" => Ok(Profile::Reference),
            other => Err(usage(format!(
                "key profile: expected tiny or reference, got {other:?}"
            ))),
        }
    }

    pub fn inner_act(&self) -> Result<Activation, CliError> {
        match self.get("inner_act") {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(usage(format!(
                "key inner_act: expected relu or tanh, got {other:?}"
            ))),
        }
    }

    pub fn n_gd_unit(&self) -> Result<NgdUnit, CliError> {
        match self.get("n_gd_unit") {
            "iteration" => Ok(NgdUnit::Iteration),
            "epoch" => Ok(NgdUnit::Epoch),
            other => Err(usage(format!(
                "key n_gd_unit: expected iteration or epoch, got {other:?}"
            ))),
        }
    }

    pub fn frontend_config(&self) -> Result<FrontendConfig, CliError> {
        Ok(FrontendConfig {
            sample_rate: self.u32("sample_rate")?,
            frame_len_ms: self.f64("frame_len_ms")?,
            hop_ms: self.f64("hop_ms")?,
            n_mels: self.usize("n_mels")?,
            fft_size: self.usize("fft_size")?,
            mel_fmin: self.f64("mel_fmin")?,
            mel_fmax: self.f64("mel_fmax")?,
            log_floor: self.f64("log_floor")?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let every = self.usize("lr_step_every")?;
        let lr_step = if every == 0 {
            None
        } else {
            Some(LrStep {
                every,
                decay: self.f64("lr_step_decay")?,
            })
        };
        Ok(TrainConfig {
            batch_size: self.usize("batch_size")?,
            ae_epochs: self.usize("ae_epochs")?,
            gan_epochs: self.usize("gan_epochs")?,
            gan_iterations: self.opt_u64("gan_iterations")?,
            n_gd: self.u64("n_gd")?,
            n_gd_unit: self.n_gd_unit()?,
            lambda: self.f64("lambda")?,
            ma_k: self.usize("ma_k")?,
            lr_ae: self.f64("lr_ae")?,
            momentum_ae: self.f64("momentum_ae")?,
            lr_gan: self.f64("lr_gan")?,
            momentum_gan: self.f64("momentum_gan")?,
            lr_step,
            r_max: self.f64("r_max")?,
            r_min: self.f64("r_min")?,
            seed: self.u64("seed")?,
            checkpoint_every: self.usize("checkpoint_every")?,
        })
    }

    /// Aligns profile and f with a loaded checkpoint's schema. An explicit
    /// conflicting key is a usage error; non-explicit profile-derived keys
    /// are re-derived so the echoed config matches what actually runs.
    pub fn adopt_schema(&mut self, profile: Profile, f: usize) -> Result<(), CliError> {
        let name = match profile {
            Profile::Tiny => "tiny",
            Profile::Reference => "reference",
        };
        if self.is_explicit("profile") && self.get("profile") != name {
            return Err(usage(format!(
                "profile {:?} conflicts with the checkpoint's {name:?}",
                self.get("profile")
            )));
        }
        if self.is_explicit("f") && self.usize("f")? != f {
            return Err(usage(format!(
                "f {} conflicts with the checkpoint's {f}",
                self.get("f")
            )));
        }
        self.values.insert("profile", name.to_string());
        self.values.insert("f", f.to_string());
        for spec in KEYS {
            if matches!(spec.default, Def::Profile)
                && spec.name != "f"
                && !self.explicit.contains(spec.name)
            {
                self.values.insert(spec.name, profile_default(profile, spec.name));
            }
        }
        Ok(())
    }

    /// Effective configuration, one key per line, stable order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for spec in KEYS {
            out.push_str(spec.name);
            out.push('=');
            out.push_str(&self.values[spec.name]);
            out.push('\n');
        }
        out
    }
}
