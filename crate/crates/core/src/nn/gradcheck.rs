//! Finite-difference gradient checking.
//!
//! Runs the network at f64, compares every analytic parameter gradient (and
//! the input gradient) against central differences of the scalar loss:
//!   numeric = (L(p + h) - L(p - h)) / (2h)
//!   rel_err = |numeric - analytic| / max(|numeric| + |analytic|, 1e-8)
//! Stochastic layers are made repeatable by reseeding the dropout RNG with
//! the same seed before every forward, so the loss is a deterministic
//! function of parameters during the check.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::S2iResult;
use crate::nn::layer::Mode;
use crate::nn::net::Network;
use crate::nn::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const REL_ERR_FLOOR: f64 = 1e-8;

/// Loss adapter: maps the network output to (scalar loss, d loss / d output).
pub type LossFn<'a> = dyn Fn(&Tensor<f64>) -> (f64, Tensor<f64>) + 'a;

#[derive(Debug)]
pub struct GradCheckReport {
    /// (parameter name, max relative error over its elements)
    pub per_tensor: Vec<(String, f64)>,
    pub input_rel_err: f64,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

fn rel_err(numeric: f64, analytic: f64) -> f64 {
    (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(REL_ERR_FLOOR)
}

fn eval_loss(
    net: &mut Network<f64>,
    input: &Tensor<f64>,
    loss: &LossFn<'_>,
    mode: Mode,
    rng_seed: u64,
) -> S2iResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let y = net.forward(input, mode, &mut rng, false)?;
    Ok(loss(&y).0)
}

fn nudge_param(net: &mut Network<f64>, tensor_idx: usize, elem_idx: usize, delta: f64) {
    let mut seen = 0usize;
    net.visit_params(&mut |_, p, _| {
        if seen == tensor_idx {
            p.data_mut()[elem_idx] += delta;
        }
        seen += 1;
    });
}

pub fn gradcheck_loss(
    net: &mut Network<f64>,
    input: &Tensor<f64>,
    loss: &LossFn<'_>,
    mode: Mode,
    rng_seed: u64,
    h: f64,
) -> S2iResult<GradCheckReport> {
    // Analytic pass.
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let y = net.forward(input, mode, &mut rng, true)?;
    let (_, dy) = loss(&y);
    net.zero_grads();
    let dinput = net.backward(&dy)?;

    let mut names: Vec<String> = Vec::new();
    let mut analytic: Vec<Tensor<f64>> = Vec::new();
    net.visit_params(&mut |n, _, g| {
        names.push(n);
        analytic.push(g.clone());
    });

    // Numeric parameter gradients.
    let mut per_tensor = Vec::with_capacity(names.len());
    let mut overall: f64 = 0.0;
    for (t, name) in names.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..analytic[t].len() {
            nudge_param(net, t, i, h);
            let lp = eval_loss(net, input, loss, mode, rng_seed)?;
            nudge_param(net, t, i, -2.0 * h);
            let lm = eval_loss(net, input, loss, mode, rng_seed)?;
            nudge_param(net, t, i, h);
            let numeric = (lp - lm) / (2.0 * h);
            worst = worst.max(rel_err(numeric, analytic[t].data()[i]));
        }
        overall = overall.max(worst);
        per_tensor.push((name.clone(), worst));
    }

    // Numeric input gradient.
    let mut x = input.clone();
    let mut input_worst: f64 = 0.0;
    for i in 0..x.len() {
        x.data_mut()[i] += h;
        let lp = eval_loss(net, &x, loss, mode, rng_seed)?;
        x.data_mut()[i] -= 2.0 * h;
        let lm = eval_loss(net, &x, loss, mode, rng_seed)?;
        x.data_mut()[i] += h;
        let numeric = (lp - lm) / (2.0 * h);
        input_worst = input_worst.max(rel_err(numeric, dinput.data()[i]));
    }
    overall = overall.max(input_worst);

    Ok(GradCheckReport {
        per_tensor,
        input_rel_err: input_worst,
        max_rel_err: overall,
    })
}

/// Mean squared error against a fixed target: the standard scalar loss used
/// for layer-level checks.
pub fn mse_loss(target: Tensor<f64>) -> impl Fn(&Tensor<f64>) -> (f64, Tensor<f64>) {
    move |y: &Tensor<f64>| {
        let n = y.len() as f64;
        let mut loss = 0.0;
        let mut dy = Tensor::zeros(y.dims());
        for (i, (&yv, &tv)) in y.data().iter().zip(target.data().iter()).enumerate() {
            let d = yv - tv;
            loss += d * d / n;
            dy.data_mut()[i] = 2.0 * d / n;
        }
        (loss, dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::xavier_uniform;
    use crate::nn::layer::*;
    use rand::Rng;

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
        Tensor::from_vec(dims, (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
    }

    fn check(net: &mut Network<f64>, input: &Tensor<f64>, out_dims: &[usize], mode: Mode) {
        let target = rand_tensor(out_dims, 777);
        let loss = mse_loss(target);
        let report = gradcheck_loss(net, input, &loss, mode, 42, DEFAULT_STEP).unwrap();
        assert!(
            report.passes(TOL),
            "gradcheck failed: max rel err {} in {:?}",
            report.max_rel_err,
            report
                .per_tensor
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(n, e)| format!("{n}: {e}"))
        );
    }

    #[test]
    fn conv_strided_padded_gradients() {
        let mut net = Network::new("t");
        net.push("conv", Layer::Conv2d(Conv2d::new(2, 3, (3, 3), (2, 2), (1, 1))));
        init_net(&mut net, 1);
        let x = rand_tensor(&[2, 2, 5, 6], 2);
        check(&mut net, &x, &[2, 3, 3, 3], Mode::Train);
    }

    #[test]
    fn fully_connected_gradients() {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(6, 4)));
        init_net(&mut net, 3);
        let x = rand_tensor(&[3, 6], 4);
        check(&mut net, &x, &[3, 4], Mode::Train);
    }

    #[test]
    fn batch_norm_train_mode_gradients() {
        let mut net = Network::new("t");
        net.push("bn", Layer::BatchNorm(BatchNorm::new(3, 0.9)));
        init_net(&mut net, 5);
        let x = rand_tensor(&[4, 3, 2, 2], 6);
        check(&mut net, &x, &[4, 3, 2, 2], Mode::Train);
    }

    #[test]
    fn activation_gradients_all_kinds() {
        for (i, act) in [
            Activation::Relu,
            Activation::LeakyRelu(0.2),
            Activation::Elu(1.0),
            Activation::Tanh,
        ]
        .into_iter()
        .enumerate()
        {
            let mut net = Network::new("t");
            net.push("fc", Layer::FullyConnected(FullyConnected::new(5, 5)));
            net.push("act", Layer::Act(ActLayer::new(act)));
            init_net(&mut net, 10 + i as u64);
            let x = rand_tensor(&[2, 5], 20 + i as u64);
            check(&mut net, &x, &[2, 5], Mode::Train);
        }
    }

    #[test]
    fn softmax_log_gradients() {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(4, 3)));
        net.push("sm", Layer::Act(ActLayer::new(Activation::SoftmaxLog)));
        init_net(&mut net, 30);
        let x = rand_tensor(&[3, 4], 31);
        check(&mut net, &x, &[3, 3], Mode::Train);
    }

    #[test]
    fn dropout_gradients_with_fixed_mask() {
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(8, 8)));
        net.push("drop", Layer::Dropout(DropoutLayer::new(0.5, false)));
        init_net(&mut net, 40);
        let x = rand_tensor(&[2, 8], 41);
        check(&mut net, &x, &[2, 8], Mode::Train);
    }

    #[test]
    fn upsample_and_reshape_gradients() {
        let mut net = Network::new("t");
        net.push("reshape", Layer::Reshape(Reshape::new(&[2, 2, 2])));
        net.push("up", Layer::Upsample(Upsample::new(5, 4)));
        net.push("conv", Layer::Conv2d(Conv2d::new(2, 1, (3, 3), (1, 1), (1, 1))));
        init_net(&mut net, 50);
        let x = rand_tensor(&[2, 8], 51);
        check(&mut net, &x, &[2, 1, 5, 4], Mode::Train);
    }

    #[test]
    fn dense_block_gradients() {
        let unit = |in_ch: usize, growth: usize| {
            vec![
                Layer::Conv2d(Conv2d::new(in_ch, growth, (3, 3), (1, 1), (1, 1))),
                Layer::BatchNorm(BatchNorm::new(growth, 0.9)),
                Layer::Act(ActLayer::new(Activation::Relu)),
            ]
        };
        let head = vec![
            Layer::Conv2d(Conv2d::new(2 + 2 * 2, 1, (3, 3), (1, 1), (1, 1))),
            Layer::Act(ActLayer::new(Activation::Tanh)),
        ];
        let mut net = Network::new("t");
        net.push_dense("block", DenseBlock::new(vec![unit(2, 2), unit(4, 2)], Some(head)));
        init_net(&mut net, 60);
        let x = rand_tensor(&[2, 2, 3, 3], 61);
        check(&mut net, &x, &[2, 1, 3, 3], Mode::Train);
    }

    #[test]
    fn eval_mode_batch_norm_gradients() {
        // Eval-mode BN treats running stats as constants; input grads must
        // still match finite differences.
        let mut net = Network::new("t");
        net.push("bn", Layer::BatchNorm(BatchNorm::new(2, 0.9)));
        net.push("act", Layer::Act(ActLayer::new(Activation::Tanh)));
        init_net(&mut net, 70);
        // push running stats away from (0, 1)
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let warm = rand_tensor(&[4, 2, 2, 2], 72);
        net.forward(&warm, Mode::Train, &mut rng, false).unwrap();
        let x = rand_tensor(&[2, 2, 2, 2], 73);
        check(&mut net, &x, &[2, 2, 2, 2], Mode::Eval);
    }

    #[test]
    fn sign_flipped_backward_is_rejected() {
        // Negative control: a backward pass that seeds the chain with the
        // wrong sign must blow past the tolerance.
        let mut net = Network::new("t");
        net.push("fc", Layer::FullyConnected(FullyConnected::new(4, 4)));
        init_net(&mut net, 80);
        let x = rand_tensor(&[2, 4], 81);
        let target = rand_tensor(&[2, 4], 82);
        let flipped = move |y: &Tensor<f64>| {
            let (l, dy) = mse_loss(target.clone())(y);
            (l, dy.map(|v| -v))
        };
        let report = gradcheck_loss(&mut net, &x, &flipped, Mode::Train, 42, DEFAULT_STEP).unwrap();
        assert!(
            !report.passes(TOL),
            "sign-flipped backward must fail gradcheck, got {}",
            report.max_rel_err
        );
    }
}
