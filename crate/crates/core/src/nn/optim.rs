//! SGD with classical momentum:
//!   v <- momentum * v + grad + weight_decay * param
//!   param <- param - lr * v
//! Velocities align with the network's parameter visit order and are part of
//! checkpoint state.

use crate::error::{S2iError, S2iResult};
use crate::nn::net::Network;
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

pub struct SgdMomentum<F> {
    pub lr: F,
    pub momentum: F,
    pub weight_decay: F,
    velocities: Vec<Tensor<F>>,
}

impl<F: Scalar> SgdMomentum<F> {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        SgdMomentum {
            lr: F::from_f64(lr),
            momentum: F::from_f64(momentum),
            weight_decay: F::from_f64(weight_decay),
            velocities: Vec::new(),
        }
    }

    /// Applies one update from the gradients currently stored in `net`.
    /// Fails without touching any parameter if some gradient is non-finite.
    pub fn step(&mut self, net: &mut Network<F>) -> S2iResult<()> {
        if self.velocities.is_empty() {
            net.visit_params(&mut |_, p, _| {
                self.velocities.push(Tensor::zeros(p.dims()));
            });
        }

        let mut bad: Option<String> = None;
        net.visit_params(&mut |name, _, g| {
            if bad.is_none() && !g.all_finite() {
                bad = Some(name);
            }
        });
        if let Some(name) = bad {
            return Err(S2iError::Training(format!(
                "non-finite gradient in {name}; update aborted"
            )));
        }

        let (lr, mom, wd) = (self.lr, self.momentum, self.weight_decay);
        let mut idx = 0usize;
        let velocities = &mut self.velocities;
        net.visit_params(&mut |_, p, g| {
            let v = &mut velocities[idx];
            idx += 1;
            for i in 0..p.len() {
                let grad = g.data()[i] + wd * p.data()[i];
                let vel = mom * v.data()[i] + grad;
                v.data_mut()[i] = vel;
                p.data_mut()[i] = p.data()[i] - lr * vel;
            }
        });
        Ok(())
    }

    pub fn velocities(&self) -> &[Tensor<F>] {
        &self.velocities
    }

    pub fn restore_velocities(&mut self, v: Vec<Tensor<F>>) {
        self.velocities = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::{FullyConnected, Layer};

    fn one_param_net(w0: f32, g0: f32) -> Network<f32> {
        let mut fc = FullyConnected::<f32>::new(1, 1);
        fc.w.data_mut()[0] = w0;
        fc.gw.data_mut()[0] = g0;
        let mut net = Network::new("n");
        net.push("fc", Layer::FullyConnected(fc));
        net
    }

    #[test]
    fn momentum_accumulates_across_steps() {
        let mut net = one_param_net(1.0, 0.5);
        let mut opt = SgdMomentum::<f32>::new(0.1, 0.9, 0.0);
        opt.step(&mut net).unwrap();
        // v = 0.5, w = 1 - 0.05 = 0.95
        let mut w = 0.0;
        net.visit_params(&mut |n, p, _| {
            if n.ends_with("weight") {
                w = p.data()[0];
            }
        });
        assert!((w - 0.95).abs() < 1e-7);

        // same gradient again: v = 0.9*0.5 + 0.5 = 0.95, w = 0.95 - 0.095
        net.visit_params(&mut |n, _, g| {
            if n.ends_with("weight") {
                g.data_mut()[0] = 0.5;
            }
        });
        opt.step(&mut net).unwrap();
        net.visit_params(&mut |n, p, _| {
            if n.ends_with("weight") {
                w = p.data()[0];
            }
        });
        assert!((w - (0.95 - 0.095)).abs() < 1e-6, "got {w}");
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let mut net = one_param_net(2.0, 0.0);
        let mut opt = SgdMomentum::<f32>::new(0.1, 0.0, 0.5);
        opt.step(&mut net).unwrap();
        // grad_eff = 0 + 0.5*2 = 1; w = 2 - 0.1 = 1.9
        let mut w = 0.0;
        net.visit_params(&mut |n, p, _| {
            if n.ends_with("weight") {
                w = p.data()[0];
            }
        });
        assert!((w - 1.9).abs() < 1e-7);
    }

    #[test]
    fn non_finite_gradient_aborts_update() {
        let mut net = one_param_net(1.0, f32::NAN);
        let mut opt = SgdMomentum::<f32>::new(0.1, 0.9, 0.0);
        let err = opt.step(&mut net);
        assert!(err.is_err());
        let mut w = 0.0;
        net.visit_params(&mut |n, p, _| {
            if n.ends_with("weight") {
                w = p.data()[0];
            }
        });
        assert_eq!(w, 1.0, "parameters must be untouched after abort");
    }
}
