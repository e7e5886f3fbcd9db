//! A network is an ordered list of named nodes, each either a primitive layer
//! or a dense block. Forward threads one activation through; backward walks
//! the same list in reverse, accumulating parameter gradients inside layers.

use rand_chacha::ChaCha8Rng;

use crate::error::S2iResult;
use crate::nn::layer::{DenseBlock, Layer, Mode, ParamFn, StateFn};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

pub enum Node<F> {
    Layer(Layer<F>),
    Dense(DenseBlock<F>),
}

pub struct Network<F> {
    pub name: String,
    pub nodes: Vec<(String, Node<F>)>,
}

impl<F: Scalar> Network<F> {
    pub fn new(name: impl Into<String>) -> Self {
        Network {
            name: name.into(),
            nodes: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, layer: Layer<F>) {
        self.nodes.push((name.into(), Node::Layer(layer)));
    }

    pub fn push_dense(&mut self, name: impl Into<String>, block: DenseBlock<F>) {
        self.nodes.push((name.into(), Node::Dense(block)));
    }

    pub fn forward(
        &mut self,
        x: &Tensor<F>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
        record: bool,
    ) -> S2iResult<Tensor<F>> {
        let mut cur = x.clone();
        for (_, node) in self.nodes.iter_mut() {
            cur = match node {
                Node::Layer(l) => l.forward(&cur, mode, rng, record)?,
                Node::Dense(b) => b.forward(&cur, mode, rng, record)?,
            };
        }
        Ok(cur)
    }

    /// Gradient w.r.t. the network input; parameter gradients accumulate in
    /// the layers and survive across calls until `zero_grads`.
    pub fn backward(&mut self, dy: &Tensor<F>) -> S2iResult<Tensor<F>> {
        let mut cur = dy.clone();
        for (_, node) in self.nodes.iter_mut().rev() {
            cur = match node {
                Node::Layer(l) => l.backward(&cur)?,
                Node::Dense(b) => b.backward(&cur)?,
            };
        }
        Ok(cur)
    }

    pub fn zero_grads(&mut self) {
        for (_, node) in self.nodes.iter_mut() {
            match node {
                Node::Layer(l) => l.zero_grads(),
                Node::Dense(b) => b.zero_grads(),
            }
        }
    }

    pub fn visit_params(&mut self, f: &mut ParamFn<'_, F>) {
        let root = self.name.clone();
        for (name, node) in self.nodes.iter_mut() {
            let prefix = format!("{root}/{name}");
            match node {
                Node::Layer(l) => l.visit_params(&prefix, f),
                Node::Dense(b) => b.visit_params(&prefix, f),
            }
        }
    }

    pub fn visit_state(&mut self, f: &mut StateFn<'_, F>) {
        let root = self.name.clone();
        for (name, node) in self.nodes.iter_mut() {
            let prefix = format!("{root}/{name}");
            match node {
                Node::Layer(l) => l.visit_state(&prefix, f),
                Node::Dense(b) => b.visit_state(&prefix, f),
            }
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0usize;
        self.visit_params(&mut |_, p, _| n += p.len());
        n
    }

    pub fn conv_layer_count(&self) -> usize {
        fn count_chain<F>(chain: &[Layer<F>]) -> usize {
            chain.iter().filter(|l| matches!(l, Layer::Conv2d(_))).count()
        }
        let mut n = 0usize;
        for (_, node) in self.nodes.iter() {
            match node {
                Node::Layer(Layer::Conv2d(_)) => n += 1,
                Node::Layer(_) => {}
                Node::Dense(b) => {
                    for unit in &b.units {
                        n += count_chain(unit);
                    }
                    if let Some(head) = &b.head {
                        n += count_chain(head);
                    }
                }
            }
        }
        n
    }

    /// Exact storage-precision bytes of all parameters and persistent state,
    /// in visit order. Two networks are byte-identical iff these agree.
    pub fn param_bytes(&mut self) -> Vec<u8> {
        let mut bytes = Vec::new();
        self.visit_params(&mut |_, p, _| {
            for &v in p.data() {
                bytes.extend_from_slice(&v.to_f32().to_le_bytes());
            }
        });
        self.visit_state(&mut |_, s| {
            for &v in s.data() {
                bytes.extend_from_slice(&v.to_f32().to_le_bytes());
            }
        });
        bytes
    }

    pub fn params_finite(&mut self) -> bool {
        let mut ok = true;
        self.visit_params(&mut |_, p, _| ok &= p.all_finite());
        ok
    }

    /// Switches translation-time dropout on or off for every dropout layer,
    /// dense-block interiors included. Training-mode behavior is unchanged.
    pub fn set_eval_dropout(&mut self, active: bool) {
        fn walk_chain<F>(chain: &mut [Layer<F>], active: bool) {
            for l in chain {
                if let Layer::Dropout(d) = l {
                    d.eval_active = active;
                }
            }
        }
        for (_, node) in self.nodes.iter_mut() {
            match node {
                Node::Layer(Layer::Dropout(d)) => d.eval_active = active,
                Node::Layer(_) => {}
                Node::Dense(b) => {
                    for unit in b.units.iter_mut() {
                        walk_chain(unit, active);
                    }
                    if let Some(head) = b.head.as_mut() {
                        walk_chain(head, active);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::{ActLayer, Activation, Conv2d};
    use rand_chacha::rand_core::SeedableRng;

    fn toy_net() -> Network<f32> {
        let mut net = Network::new("toy");
        net.push("conv0", Layer::Conv2d(Conv2d::new(1, 2, (3, 3), (1, 1), (1, 1))));
        net.push("act0", Layer::Act(ActLayer::new(Activation::Relu)));
        net.push("conv1", Layer::Conv2d(Conv2d::new(2, 1, (3, 3), (1, 1), (1, 1))));
        net
    }

    #[test]
    fn visit_params_names_are_stable_and_prefixed() {
        let mut net = toy_net();
        let mut names = Vec::new();
        net.visit_params(&mut |n, _, _| names.push(n));
        assert_eq!(
            names,
            vec!["toy/conv0/weight", "toy/conv0/bias", "toy/conv1/weight", "toy/conv1/bias"]
        );
    }

    #[test]
    fn param_bytes_detects_any_change() {
        let mut net = toy_net();
        let before = net.param_bytes();
        net.visit_params(&mut |name, p, _| {
            if name == "toy/conv1/weight" {
                p.data_mut()[3] += 1e-7;
            }
        });
        assert_ne!(before, net.param_bytes());
    }

    #[test]
    fn eval_dropout_toggle_controls_inference_stochasticity() {
        use crate::nn::layer::DropoutLayer;
        let mut net = Network::<f32>::new("d");
        net.push("drop", Layer::Dropout(DropoutLayer::new(0.5, true)));
        let x = Tensor::from_vec(&[1, 4], vec![1.0f32; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let active = net.forward(&x, Mode::Eval, &mut rng, false).unwrap();
        assert_ne!(active.data(), x.data());
        net.set_eval_dropout(false);
        let frozen = net.forward(&x, Mode::Eval, &mut rng, false).unwrap();
        assert_eq!(frozen.data(), x.data());
    }

    #[test]
    fn forward_backward_round_trip_shapes() {
        let mut net = toy_net();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::zeros(&[2, 1, 5, 5]);
        let y = net.forward(&x, Mode::Train, &mut rng, true).unwrap();
        assert_eq!(y.dims(), &[2, 1, 5, 5]);
        let dx = net.backward(&y).unwrap();
        assert_eq!(dx.dims(), x.dims());
        assert_eq!(net.conv_layer_count(), 2);
    }
}
