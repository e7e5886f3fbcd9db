//! Introspection commands. Both print to stdout and write nothing.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use s2i_core::eval::nll_loss;
use s2i_core::io::read_checkpoint;
use s2i_core::losses::{audio_recon_loss, image_recon_loss, score_loss};
use s2i_core::models::{build_network, LayerDesc, ModelSchema, SchemaOptions};
use s2i_core::nn::gradcheck::{gradcheck_loss, mse_loss, GradCheckReport, DEFAULT_STEP};
use s2i_core::nn::layer::{
    ActLayer, BatchNorm, Conv2d, DropoutLayer, FullyConnected, Reshape, Upsample,
};
use s2i_core::nn::{xavier_uniform, Activation, DenseBlock, Layer, Mode, Network, RngState, StreamId, Tensor};

use crate::config::Resolved;
use crate::{usage, CliError};

fn act_str(act: &Activation) -> String {
    match act {
        Activation::Relu => "relu".into(),
        Activation::LeakyRelu(s) => format!("leaky_relu({s})"),
        Activation::Elu(a) => format!("elu({a})"),
        Activation::Tanh => "tanh".into(),
        Activation::SoftmaxLog => "softmax_log".into(),
    }
}

fn desc_str(desc: &LayerDesc) -> String {
    match desc {
        LayerDesc::Conv2d { in_ch, out_ch, kernel, stride, padding } => {
            format!("conv {kernel}x{kernel} s{stride} p{padding} {in_ch}->{out_ch}")
        }
        LayerDesc::Upsample { out_h, out_w } => format!("upsample -> {out_h}x{out_w}"),
        LayerDesc::FullyConnected { in_units, out_units } => format!("fc {in_units}->{out_units}"),
        LayerDesc::BatchNorm { channels } => format!("bn {channels}"),
        LayerDesc::Activation { act } => act_str(act),
        LayerDesc::Dropout { p, eval_active } => {
            if *eval_active {
                format!("dropout {p} (eval)")
            } else {
                format!("dropout {p}")
            }
        }
        LayerDesc::Reshape { per_sample } => format!("reshape {per_sample:?}"),
        LayerDesc::DenseBlock { in_ch, growth, units, head_out, act } => {
            let head = head_out.map(|h| format!(" head {h}")).unwrap_or_default();
            format!("dense in {in_ch} +{growth} x{units}{head} {}", act_str(act))
        }
    }
}

pub fn describe(r: &mut Resolved) -> Result<(), CliError> {
    let schema = if r.get("checkpoint").is_empty() {
        ModelSchema::new(
            r.profile()?,
            r.usize("f")?,
            SchemaOptions {
                inner_act: r.inner_act()?,
                dropout_p: r.f64("dropout_p")?,
            },
        )
        .map_err(usage)?
    } else {
        let data = read_checkpoint(Path::new(r.get("checkpoint")))?;
        ModelSchema::from_json(&data.schema_json)?
    };

    let (rows, cols) = schema.profile.spectrogram_shape();
    println!(
        "profile {}  embedding {}  spectrogram {rows}x{cols}  image {}x{}",
        r.get("profile"),
        schema.f,
        schema.profile.image_size(),
        schema.profile.image_size()
    );

    let nets: [(&str, &str, &Vec<LayerDesc>); 6] = [
        ("audio encoder", "a_enc", &schema.audio_encoder),
        ("audio decoder", "a_dec", &schema.audio_decoder),
        ("generator", "gen", &schema.generator),
        ("discriminator trunk", "disc_trunk", &schema.disc_trunk),
        ("discriminator head", "disc_head", &schema.disc_head),
        ("classifier", "clf", &schema.classifier),
    ];
    let mut rng = RngState::new(0);
    let mut grand_total = 0usize;
    for (label, name, descs) in nets {
        let mut net = build_network::<f32>(name, descs, rng.stream(StreamId::Init))?;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        net.visit_params(&mut |pname, p, _| {
            let node = pname.split('/').nth(1).unwrap_or("").to_string();
            *counts.entry(node).or_insert(0) += p.len();
        });
        let total: usize = counts.values().sum();
        println!("\n{label} ({total} params)");
        for ((node_name, _), desc) in net.nodes.iter().zip(descs) {
            let c = counts.get(node_name.as_str()).copied().unwrap_or(0);
            println!("  {node_name:<12} {:<36} {c:>9}", desc_str(desc));
        }
        grand_total += total;
    }
    println!("\ntotal parameters: {grand_total}");
    Ok(())
}

const TOL: f64 = 1e-4;

fn init_net(net: &mut Network<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.visit_params(&mut |name, p, _| {
        if name.ends_with("weight") {
            let n = p.len();
            xavier_uniform(p, n, n, &mut rng);
        } else if name.ends_with("bias") || name.ends_with("beta") {
            for v in p.data_mut() {
                *v = rng.random::<f64>() * 0.1 - 0.05;
            }
        } else if name.ends_with("gamma") {
            for v in p.data_mut() {
                *v = 0.8 + rng.random::<f64>() * 0.4;
            }
        }
    });
}

fn rand_tensor(dims: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .expect("dims match data")
}

fn mse_check(
    net: &mut Network<f64>,
    x: &Tensor<f64>,
    out_dims: &[usize],
    mode: Mode,
) -> Result<GradCheckReport, CliError> {
    let target = rand_tensor(out_dims, 777);
    let loss = mse_loss(target);
    Ok(gradcheck_loss(net, x, &loss, mode, 42, DEFAULT_STEP)?)
}

fn dense_unit(in_ch: usize, growth: usize) -> Vec<Layer<f64>> {
    vec![
        Layer::Conv2d(Conv2d::new(in_ch, growth, (3, 3), (1, 1), (1, 1))),
        Layer::BatchNorm(BatchNorm::new(growth, 0.9)),
        Layer::Act(ActLayer::new(Activation::Relu)),
    ]
}

/// One finite-difference case per layer kind plus one per loss, then a
/// sign-flipped negative control that must be rejected.
pub fn gradcheck_cmd(_r: &mut Resolved) -> Result<(), CliError> {
    let mut rows: Vec<(String, f64, bool)> = Vec::new();
    let mut record = |name: &str, report: GradCheckReport| {
        rows.push((name.to_string(), report.max_rel_err, report.passes(TOL)));
    };

    {
        let mut net = Network::new("t");
        net.push("conv", Layer::Conv2d(Conv2d::new(2, 3, (3, 3), (2, 2), (1, 1))));
        init_net(&mut net, 1);
        let x = rand_tensor(&[2, 2, 5, 6], 2);
        record("conv2d", mse_check(&mut net, &x, &[2, 3, 3, 3], Mode::Train)?);
    }
    {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(6, 4)));
        init_net(&mut net, 3);
        let x = rand_tensor(&[3, 6], 4);
        record("fully_connected", mse_check(&mut net, &x, &[3, 4], Mode::Train)?);
    }
    {
        let mut net = Network::new("t");
        net.push("bn", Layer::BatchNorm(BatchNorm::new(3, 0.9)));
        init_net(&mut net, 5);
        let x = rand_tensor(&[4, 3, 2, 2], 6);
        record("batch_norm_train", mse_check(&mut net, &x, &[4, 3, 2, 2], Mode::Train)?);
    }
    for (i, act) in [
        Activation::Relu,
        Activation::LeakyRelu(0.2),
        Activation::Elu(1.0),
        Activation::Tanh,
    ]
    .into_iter()
    .enumerate()
    {
        let name = act_str(&act);
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(5, 5)));
        net.push("act", Layer::Act(ActLayer::new(act)));
        init_net(&mut net, 10 + i as u64);
        let x = rand_tensor(&[2, 5], 20 + i as u64);
        record(&name, mse_check(&mut net, &x, &[2, 5], Mode::Train)?);
    }
    {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(4, 3)));
        net.push("sm", Layer::Act(ActLayer::new(Activation::SoftmaxLog)));
        init_net(&mut net, 30);
        let x = rand_tensor(&[3, 4], 31);
        record("softmax_log", mse_check(&mut net, &x, &[3, 3], Mode::Train)?);
    }
    {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(8, 8)));
        net.push("drop", Layer::Dropout(DropoutLayer::new(0.5, false)));
        init_net(&mut net, 40);
        let x = rand_tensor(&[2, 8], 41);
        record("dropout_fixed_mask", mse_check(&mut net, &x, &[2, 8], Mode::Train)?);
    }
    {
        let mut net = Network::new("t");
        net.push("reshape", Layer::Reshape(Reshape::new(&[2, 2, 2])));
        net.push("up", Layer::Upsample(Upsample::new(5, 4)));
        net.push("conv", Layer::Conv2d(Conv2d::new(2, 1, (3, 3), (1, 1), (1, 1))));
        init_net(&mut net, 50);
        let x = rand_tensor(&[2, 8], 51);
        record("reshape_upsample", mse_check(&mut net, &x, &[2, 1, 5, 4], Mode::Train)?);
    }
    {
        let head = vec![
            Layer::Conv2d(Conv2d::new(2 + 2 * 2, 1, (3, 3), (1, 1), (1, 1))),
            Layer::Act(ActLayer::new(Activation::Tanh)),
        ];
        let mut net = Network::new("t");
        net.push_dense(
            "block",
            DenseBlock::new(vec![dense_unit(2, 2), dense_unit(4, 2)], Some(head)),
        );
        init_net(&mut net, 60);
        let x = rand_tensor(&[2, 2, 3, 3], 61);
        record("dense_block", mse_check(&mut net, &x, &[2, 1, 3, 3], Mode::Train)?);
    }
    {
        let mut net = Network::new("t");
        net.push("bn", Layer::BatchNorm(BatchNorm::new(2, 0.9)));
        net.push("act", Layer::Act(ActLayer::new(Activation::Tanh)));
        init_net(&mut net, 70);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let warm = rand_tensor(&[4, 2, 2, 2], 72);
        net.forward(&warm, Mode::Train, &mut rng, false)?;
        let x = rand_tensor(&[2, 2, 2, 2], 73);
        record("batch_norm_eval", mse_check(&mut net, &x, &[2, 2, 2, 2], Mode::Eval)?);
    }
    {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(8, 8)));
        net.push("reshape", Layer::Reshape(Reshape::new(&[1, 2, 4])));
        init_net(&mut net, 90);
        let x = rand_tensor(&[2, 8], 91);
        let target = rand_tensor(&[2, 1, 2, 4], 92);
        let loss = move |y: &Tensor<f64>| audio_recon_loss(&target, y).expect("fixed shapes");
        record(
            "audio_recon_loss",
            gradcheck_loss(&mut net, &x, &loss, Mode::Train, 42, DEFAULT_STEP)?,
        );
    }
    {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(6, 12)));
        net.push("reshape", Layer::Reshape(Reshape::new(&[3, 2, 2])));
        init_net(&mut net, 93);
        let x = rand_tensor(&[2, 6], 94);
        let target = rand_tensor(&[2, 3, 2, 2], 95);
        let loss = move |y: &Tensor<f64>| image_recon_loss(&target, y).expect("fixed shapes");
        record(
            "image_recon_loss",
            gradcheck_loss(&mut net, &x, &loss, Mode::Train, 42, DEFAULT_STEP)?,
        );
    }
    {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(4, 1)));
        init_net(&mut net, 96);
        let x = rand_tensor(&[2, 4], 97);
        let loss = |y: &Tensor<f64>| score_loss(1.0, y).expect("fixed shapes");
        record(
            "score_loss",
            gradcheck_loss(&mut net, &x, &loss, Mode::Train, 42, DEFAULT_STEP)?,
        );
    }
    {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(4, 3)));
        net.push("sm", Layer::Act(ActLayer::new(Activation::SoftmaxLog)));
        init_net(&mut net, 98);
        let x = rand_tensor(&[3, 4], 99);
        let loss = |y: &Tensor<f64>| nll_loss(y, &[0, 2, 1]).expect("fixed shapes");
        record(
            "nll_loss",
            gradcheck_loss(&mut net, &x, &loss, Mode::Train, 42, DEFAULT_STEP)?,
        );
    }

    // Negative control: a wrong-signed backward must blow the tolerance,
    // proving the harness can fail at all.
    let control_rejected = {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(4, 4)));
        init_net(&mut net, 80);
        let x = rand_tensor(&[2, 4], 81);
        let target = rand_tensor(&[2, 4], 82);
        let flipped = move |y: &Tensor<f64>| {
            let (l, dy) = mse_loss(target.clone())(y);
            (l, dy.map(|v| -v))
        };
        let report = gradcheck_loss(&mut net, &x, &flipped, Mode::Train, 42, DEFAULT_STEP)?;
        !report.passes(TOL)
    };

    println!("{:<20} {:>12}  status", "case", "max_rel_err");
    let mut failures = 0usize;
    for (name, err, pass) in &rows {
        println!("{name:<20} {err:>12.3e}  {}", if *pass { "PASS" } else { "FAIL" });
        if !*pass {
            failures += 1;
        }
    }
    println!(
        "{:<20} {:>12}  {}",
        "sign_flip_control",
        "-",
        if control_rejected { "PASS (rejected)" } else { "FAIL (accepted)" }
    );
    if !control_rejected {
        failures += 1;
    }
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} gradient checks failed")));
    }
    println!("all {} checks passed (tolerance {TOL:.0e})", rows.len() + 1);
    Ok(())
}
