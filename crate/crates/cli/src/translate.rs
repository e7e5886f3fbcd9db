//! Sound-to-image inference on one WAV file.

use std::fs;

use s2i_core::io::{read_wav_mono, save_rgb8, tensor_to_rgb8};
use s2i_core::dsp::{log_mel_spectrogram, normalize_spectrogram};
use s2i_core::models::{encode_audio, generate_image};
use s2i_core::nn::{Mode, RngState, StreamId, Tensor};
use s2i_core::training::load_gan_nets;

use crate::config::Resolved;
use crate::data::{read_stats_required, stats_path};
use crate::{log, usage, write_run_preamble, CliError};

pub fn translate(r: &mut Resolved) -> Result<(), CliError> {
    let run_dir = r.path("run_dir")?;
    let data_dir = r.path("data_dir")?;
    r.default_empty(
        "checkpoint",
        run_dir.join("gan").join("gan_final.s2ic").display().to_string(),
    );
    let mut state = load_gan_nets(&r.path("checkpoint")?)?;
    r.adopt_schema(state.schema.profile, state.schema.f)?;
    let dsp = r.frontend_config()?;
    dsp.validate().map_err(usage)?;
    let sound = r.path("sound")?;
    let n = r.usize("samples")?;
    if n == 0 {
        return Err(CliError::Usage("key samples must be >= 1".into()));
    }
    let dropout_on = match r.get("dropout") {
        "on" => true,
        "off" => false,
        other => {
            return Err(CliError::Usage(format!(
                "key dropout: expected on or off, got {other:?}"
            )))
        }
    };
    let sp = stats_path(r, &run_dir, &data_dir);
    r.default_empty("stats", sp.display().to_string());
    write_run_preamble(&run_dir, r)?;
    let stats = read_stats_required(&sp)?;

    let (wav, sr) = read_wav_mono(&sound)?;
    if sr != dsp.sample_rate {
        return Err(CliError::Runtime(format!(
            "{}: sample rate {sr} != configured {}",
            sound.display(),
            dsp.sample_rate
        )));
    }
    let raw = log_mel_spectrogram(&wav, &dsp)?;
    let (norm, clipped) = normalize_spectrogram(&raw, stats);
    let (rows, cols) = state.schema.profile.spectrogram_shape();
    if (norm.rows, norm.cols) != (rows, cols) {
        return Err(CliError::Runtime(format!(
            "spectrogram {}x{} does not match the model's {rows}x{cols}; check segment \
             length and frontend keys",
            norm.rows, norm.cols
        )));
    }
    if clipped {
        log("normalize_clipped", &[("sound", sound.display().to_string())]);
    }

    let mut rng = RngState::new(r.u64("seed")?);
    let x = norm.to_input::<f32>();
    let emb = encode_audio(
        &state.schema,
        &mut state.enc,
        &x,
        Mode::Eval,
        rng.stream(StreamId::Dropout),
    )?;
    state.gen.set_eval_dropout(dropout_on);

    let out_dir = run_dir.join("translate");
    fs::create_dir_all(&out_dir)?;
    let mut first_two: Vec<Tensor<f32>> = Vec::new();
    for k in 0..n {
        let img = generate_image(
            &state.schema,
            &mut state.gen,
            &emb,
            Mode::Eval,
            rng.stream(StreamId::Dropout),
        )?;
        let dims = img.dims().to_vec();
        let flat = Tensor::from_vec(&dims[1..], img.data().to_vec())?;
        let (w, h, pixels) = tensor_to_rgb8(&flat)?;
        save_rgb8(&out_dir.join(format!("translation_{k:02}.png")), w, h, &pixels)?;
        if first_two.len() < 2 {
            first_two.push(flat);
        }
    }

    let mut csv = String::from("dim,value\n");
    for (i, v) in emb.data().iter().enumerate() {
        csv.push_str(&format!("{i},{v}\n"));
    }
    fs::write(out_dir.join("embedding.csv"), csv)?;

    // Mean absolute pixel gap between the first two draws: zero with dropout
    // off, visibly positive with it on.
    let diversity = if first_two.len() == 2 {
        let a = first_two[0].data();
        let b = first_two[1].data();
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
            .sum::<f64>()
            / a.len() as f64
    } else {
        0.0
    };
    log(
        "translate",
        &[
            ("sound", sound.display().to_string()),
            ("samples", n.to_string()),
            ("dropout", if dropout_on { "on".into() } else { "off".into() }),
            ("diversity", diversity.to_string()),
            ("out_dir", out_dir.display().to_string()),
        ],
    );
    Ok(())
}
