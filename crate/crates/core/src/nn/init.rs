//! Glorot/Xavier uniform initialization:
//! W ~ U(-sqrt(6)/sqrt(n_i + n_{i+1}), +sqrt(6)/sqrt(n_i + n_{i+1}))
//! where n_i counts incoming connections and n_{i+1} outgoing ones. For a
//! convolution that is in_ch*kh*kw and out_ch*kh*kw; for a fully connected
//! layer, its input and output widths. Biases stay zero.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    assert!(fan_in + fan_out > 0, "xavier fans must not both be zero");
    (6.0f64).sqrt() / ((fan_in + fan_out) as f64).sqrt()
}

/// Fill `t` with Xavier-uniform draws. Draws are f64 so the consumed RNG
/// stream is identical for f32 and f64 tensors.
pub fn xavier_uniform<F: Scalar>(
    t: &mut Tensor<F>,
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) {
    let bound = xavier_bound(fan_in, fan_out);
    for v in t.data_mut().iter_mut() {
        let u: f64 = rng.random(); // [0, 1)
        *v = F::from_f64((2.0 * u - 1.0) * bound);
    }
}
