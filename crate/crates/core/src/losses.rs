//! Training objectives.
//!
//! All reconstruction losses are plain MSE with explicit divisors; the score
//! loss drives the discriminator's realness-and-coherence scalar toward a
//! target; the generator's adversarial term is smoothed with a moving average
//! over recent epoch means before it is mixed into the total. Every function
//! returns the loss together with the gradient w.r.t. the prediction.

use serde::{Deserialize, Serialize};

use crate::error::{S2iError, S2iResult};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

/// Spectrogram reconstruction: mean squared error with divisor b*h*w.
/// Accepts [b, h, w] or single-channel [b, 1, h, w].
pub fn audio_recon_loss<F: Scalar>(
    target: &Tensor<F>,
    pred: &Tensor<F>,
) -> S2iResult<(F, Tensor<F>)> {
    if target.dims() != pred.dims() {
        return Err(S2iError::shape(
            "audio_recon_loss",
            format!("{:?}", target.dims()),
            format!("{:?}", pred.dims()),
        ));
    }
    let d = target.dims();
    let ok = match d.len() {
        3 => true,
        4 => d[1] == 1,
        _ => false,
    };
    if !ok {
        return Err(S2iError::shape(
            "audio_recon_loss",
            "[b, h, w] or [b, 1, h, w]",
            format!("{:?}", d),
        ));
    }
    mse_with_divisor(target, pred, target.len())
}

/// Image reconstruction: mean squared error with divisor b*c*h*w.
pub fn image_recon_loss<F: Scalar>(
    target: &Tensor<F>,
    pred: &Tensor<F>,
) -> S2iResult<(F, Tensor<F>)> {
    if target.dims() != pred.dims() {
        return Err(S2iError::shape(
            "image_recon_loss",
            format!("{:?}", target.dims()),
            format!("{:?}", pred.dims()),
        ));
    }
    if target.dims().len() != 4 {
        return Err(S2iError::shape(
            "image_recon_loss",
            "[b, c, h, w]",
            format!("{:?}", target.dims()),
        ));
    }
    mse_with_divisor(target, pred, target.len())
}

fn mse_with_divisor<F: Scalar>(
    target: &Tensor<F>,
    pred: &Tensor<F>,
    divisor: usize,
) -> S2iResult<(F, Tensor<F>)> {
    let n = F::from_usize(divisor);
    let two = F::from_f64(2.0);
    let mut loss = F::zero();
    let mut grad = Tensor::zeros(pred.dims());
    for (i, (&t, &p)) in target.data().iter().zip(pred.data().iter()).enumerate() {
        let d = p - t;
        loss = loss + d * d;
        grad.data_mut()[i] = two * d / n;
    }
    Ok((loss / n, grad))
}

/// Score regression toward a fixed target r: (1/b) sum_i (r - r_i)^2.
/// `scores` is [b] or [b, 1]; the gradient is w.r.t. the scores.
pub fn score_loss<F: Scalar>(target: f64, scores: &Tensor<F>) -> S2iResult<(F, Tensor<F>)> {
    let d = scores.dims();
    let ok = d.len() == 1 || (d.len() == 2 && d[1] == 1);
    if !ok || scores.is_empty() {
        return Err(S2iError::shape(
            "score_loss",
            "[b] or [b, 1], b >= 1",
            format!("{:?}", d),
        ));
    }
    let b = F::from_usize(scores.len());
    let r = F::from_f64(target);
    let two = F::from_f64(2.0);
    let mut loss = F::zero();
    let mut grad = Tensor::zeros(d);
    for (i, &s) in scores.data().iter().enumerate() {
        let diff = r - s;
        loss = loss + diff * diff;
        grad.data_mut()[i] = two * (s - r) / b;
    }
    Ok((loss / b, grad))
}

/// Trailing history of per-epoch mean adversarial losses, used to smooth the
/// generator's adversarial term:
///   ma = (current + sum of up to k-1 most recent epoch means) / (used + 1)
/// The divisor reaches k once k-1 epochs exist; earlier it averages whatever
/// is available. History entries are constants w.r.t. the current update, so
/// d(ma)/d(current) = 1/divisor.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AdvLossHistory {
    pub k: usize,
    epoch_means: Vec<f64>,
}

impl AdvLossHistory {
    pub fn new(k: usize) -> S2iResult<Self> {
        if k == 0 {
            return Err(S2iError::Config("moving-average window k must be >= 1".into()));
        }
        Ok(AdvLossHistory {
            k,
            epoch_means: Vec::new(),
        })
    }

    pub fn push_epoch(&mut self, mean: f64) {
        self.epoch_means.push(mean);
    }

    pub fn epochs_recorded(&self) -> usize {
        self.epoch_means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.epoch_means
    }

    /// Smoothed value and the divisor applied to the current term.
    pub fn moving_average(&self, current: f64) -> (f64, usize) {
        let used = self.epoch_means.len().min(self.k - 1);
        let tail = &self.epoch_means[self.epoch_means.len() - used..];
        let divisor = used + 1;
        ((current + tail.iter().sum::<f64>()) / divisor as f64, divisor)
    }
}

/// Generator total: pixel term plus lambda times the smoothed adversarial term.
pub fn generator_total(pixel: f64, ma_adv: f64, lambda: f64) -> f64 {
    pixel + lambda * ma_adv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor_f64(dims: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        Tensor::from_vec(dims, (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
    }

    /// Plain-loop reference for the batched MSE forms.
    fn mse_oracle(target: &[f64], pred: &[f64], divisor: usize) -> f64 {
        let mut acc = 0.0;
        for (t, p) in target.iter().zip(pred.iter()) {
            acc += (t - p) * (t - p);
        }
        acc / divisor as f64
    }

    #[test]
    fn audio_loss_matches_loop_oracle_f64() {
        for seed in 0..20 {
            let t = rand_tensor_f64(&[3, 5, 4], seed);
            let p = rand_tensor_f64(&[3, 5, 4], seed + 1000);
            let (loss, _) = audio_recon_loss(&t, &p).unwrap();
            let want = mse_oracle(t.data(), p.data(), 3 * 5 * 4);
            assert!((loss - want).abs() < 1e-12, "seed {seed}: {loss} vs {want}");
        }
    }

    /// f32 oracle: independent loop in f32 arithmetic, matching the storage
    /// precision of the implementation under test.
    fn mse_oracle_f32(target: &[f32], pred: &[f32], divisor: usize) -> f32 {
        let mut acc = 0.0f32;
        for (t, p) in target.iter().zip(pred.iter()) {
            acc += (t - p) * (t - p);
        }
        acc / divisor as f32
    }

    #[test]
    fn image_loss_matches_loop_oracle_f32() {
        for seed in 0..20 {
            let t: Tensor<f32> = rand_tensor_f64(&[2, 3, 4, 4], seed).cast();
            let p: Tensor<f32> = rand_tensor_f64(&[2, 3, 4, 4], seed + 500).cast();
            let (loss, _) = image_recon_loss(&t, &p).unwrap();
            let want = mse_oracle_f32(t.data(), p.data(), 2 * 3 * 4 * 4);
            assert!((loss - want).abs() < 1e-7, "seed {seed}: {loss} vs {want}");
        }
    }

    #[test]
    fn score_loss_matches_loop_oracle() {
        for seed in 0..20 {
            let s = rand_tensor_f64(&[6], seed);
            let (loss, grad) = score_loss(1.0, &s).unwrap();
            let mut want = 0.0;
            for &v in s.data() {
                want += (1.0 - v) * (1.0 - v);
            }
            want /= 6.0;
            assert!((loss - want).abs() < 1e-12);
            for (i, &g) in grad.data().iter().enumerate() {
                let want_g = 2.0 * (s.data()[i] - 1.0) / 6.0;
                assert!((g - want_g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        let t = rand_tensor_f64(&[2, 3, 3], 7);
        let mut p = rand_tensor_f64(&[2, 3, 3], 8);
        let (_, grad) = audio_recon_loss(&t, &p).unwrap();
        for i in 0..p.len() {
            p.data_mut()[i] += h;
            let lp = audio_recon_loss(&t, &p).unwrap().0;
            p.data_mut()[i] -= 2.0 * h;
            let lm = audio_recon_loss(&t, &p).unwrap().0;
            p.data_mut()[i] += h;
            let numeric = (lp - lm) / (2.0 * h);
            assert!((numeric - grad.data()[i]).abs() < 1e-8);
        }

        let mut s = rand_tensor_f64(&[5], 9);
        let (_, sgrad) = score_loss(-1.0, &s).unwrap();
        for i in 0..s.len() {
            s.data_mut()[i] += h;
            let lp = score_loss(-1.0, &s).unwrap().0;
            s.data_mut()[i] -= 2.0 * h;
            let lm = score_loss(-1.0, &s).unwrap().0;
            s.data_mut()[i] += h;
            assert!(((lp - lm) / (2.0 * h) - sgrad.data()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn moving_average_worked_example() {
        // current 0.9, history [0.6, 0.3], k=3 -> (0.9+0.6+0.3)/3 = 0.6
        let mut hist = AdvLossHistory::new(3).unwrap();
        hist.push_epoch(0.6);
        hist.push_epoch(0.3);
        let (ma, divisor) = hist.moving_average(0.9);
        assert_eq!(divisor, 3);
        assert!((ma - 0.6).abs() < 1e-15);
    }

    #[test]
    fn moving_average_warm_up() {
        let mut hist = AdvLossHistory::new(5).unwrap();
        // no history: average of just the current term
        assert_eq!(hist.moving_average(0.8), (0.8, 1));
        hist.push_epoch(0.4);
        let (ma, d) = hist.moving_average(0.8);
        assert_eq!(d, 2);
        assert!((ma - 0.6).abs() < 1e-15);
    }

    #[test]
    fn moving_average_uses_most_recent_window() {
        let mut hist = AdvLossHistory::new(3).unwrap();
        for m in [10.0, 0.2, 0.4] {
            hist.push_epoch(m);
        }
        // k-1 = 2 most recent means are 0.2 and 0.4; the 10.0 must be ignored
        let (ma, d) = hist.moving_average(0.6);
        assert_eq!(d, 3);
        assert!((ma - 0.4).abs() < 1e-15);
    }

    #[test]
    fn total_mixes_with_lambda() {
        assert!((generator_total(0.5, 0.3, 0.1) - 0.53).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let a = Tensor::<f32>::zeros(&[2, 3, 3]);
        let b = Tensor::<f32>::zeros(&[2, 3, 4]);
        assert!(audio_recon_loss(&a, &b).is_err());
        let img = Tensor::<f32>::zeros(&[2, 3, 3, 3]);
        assert!(audio_recon_loss(&img, &img).is_err(), "multi-channel input must be rejected");
        let empty = Tensor::<f32>::zeros(&[0]);
        assert!(score_loss(1.0, &empty).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Batch order must not matter for any batched loss.
        #[test]
        fn score_loss_permutation_invariant(seed in 0u64..500) {
            let s = rand_tensor_f64(&[8], seed);
            let (l1, _) = score_loss(1.0, &s).unwrap();
            let mut rev: Vec<f64> = s.data().to_vec();
            rev.reverse();
            let (l2, _) = score_loss(1.0, &Tensor::from_vec(&[8], rev).unwrap()).unwrap();
            prop_assert!((l1 - l2).abs() < 1e-12);
        }

        // Losses are nonnegative and zero exactly at a perfect prediction.
        #[test]
        fn losses_nonnegative(seed in 0u64..500) {
            let t = rand_tensor_f64(&[2, 4, 4], seed);
            let p = rand_tensor_f64(&[2, 4, 4], seed + 1);
            let (l, _) = audio_recon_loss(&t, &p).unwrap();
            prop_assert!(l >= 0.0);
            let (zero, _) = audio_recon_loss(&t, &t).unwrap();
            prop_assert!(zero == 0.0);
        }
    }
}
