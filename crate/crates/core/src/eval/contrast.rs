//! Template-contrast test: do translated images correlate more with their
//! own class's canonical image than with other classes'? Significance comes
//! from a label-permutation null.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::ncc;
use crate::error::{S2iError, S2iResult};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastResult {
    /// Mean over images of ncc(own template) - mean ncc(other templates).
    pub observed: f64,
    /// Permutation p-value with the +1 correction, in (0, 1].
    pub p_value: f64,
    pub n_permutations: usize,
}

fn to_f64<F: Scalar>(t: &Tensor<F>) -> Vec<f64> {
    t.data().iter().map(|&v| v.to_f64()).collect()
}

fn mean_contrast(ncc_matrix: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = ncc_matrix[0].len();
    let mut sum = 0.0;
    for (row, &label) in ncc_matrix.iter().zip(labels) {
        let own = row[label];
        let others: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label)
            .map(|(_, v)| v)
            .sum();
        sum += own - others / (k - 1) as f64;
    }
    sum / ncc_matrix.len() as f64
}

/// Compares each image against every class template by normalized cross
/// correlation, then tests whether own-class affinity beats the permutation
/// null. Labels are class indices into `templates`.
pub fn template_contrast<F: Scalar>(
    images: &[Tensor<F>],
    labels: &[usize],
    templates: &[Tensor<F>],
    n_permutations: usize,
    seed: u64,
) -> S2iResult<ContrastResult> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(S2iError::Data(format!(
            "need matching non-empty images and labels, got {} and {}",
            images.len(),
            labels.len()
        )));
    }
    if templates.len() < 2 {
        return Err(S2iError::Data(
            "contrast needs at least two class templates".into(),
        ));
    }
    if n_permutations == 0 {
        return Err(S2iError::Config("n_permutations must be >= 1".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= templates.len()) {
        return Err(S2iError::Data(format!(
            "label {l} out of range for {} templates",
            templates.len()
        )));
    }

    let template_data: Vec<Vec<f64>> = templates.iter().map(to_f64).collect();

    // The ncc matrix is fixed; permutations only reshuffle labels.
    let mut ncc_matrix = Vec::with_capacity(images.len());
    for img in images {
        let a = to_f64(img);
        if a.len() != template_data[0].len() {
            return Err(S2iError::shape(
                "template_contrast",
                format!("{} elements", template_data[0].len()),
                format!("{} elements", a.len()),
            ));
        }
        let row: Vec<f64> = template_data.iter().map(|t| ncc(&a, t)).collect();
        ncc_matrix.push(row);
    }

    let observed = mean_contrast(&ncc_matrix, labels);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut permuted = labels.to_vec();
    let mut at_least = 0usize;
    for _ in 0..n_permutations {
        for i in (1..permuted.len()).rev() {
            let j = rng.random_range(0..=i);
            permuted.swap(i, j);
        }
        if mean_contrast(&ncc_matrix, &permuted) >= observed {
            at_least += 1;
        }
    }
    let p_value = (1 + at_least) as f64 / (n_permutations + 1) as f64;

    Ok(ContrastResult {
        observed,
        p_value,
        n_permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(n_per_class: usize, k: usize, noise: f64, seed: u64) -> (Vec<Tensor<f64>>, Vec<usize>, Vec<Tensor<f64>>) {
        // Orthogonal-ish templates: one-hot blocks over a 64-long vector.
        let len = 64;
        let templates: Vec<Tensor<f64>> = (0..k)
            .map(|c| {
                let mut v = vec![0.0; len];
                for i in 0..len / k {
                    v[c * (len / k) + i] = 1.0;
                }
                Tensor::from_vec(&[len], v).unwrap()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for c in 0..k {
            for _ in 0..n_per_class {
                let data: Vec<f64> = templates[c]
                    .data()
                    .iter()
                    .map(|&t| t + noise * (rng.random::<f64>() - 0.5))
                    .collect();
                images.push(Tensor::from_vec(&[len], data).unwrap());
                labels.push(c);
            }
        }
        (images, labels, templates)
    }

    #[test]
    fn planted_signal_gets_small_p_value() {
        let (images, labels, templates) = planted(20, 3, 0.2, 1);
        let r = template_contrast(&images, &labels, &templates, 999, 42).unwrap();
        assert!(r.observed > 0.5, "observed {}", r.observed);
        assert!(r.p_value < 0.01, "p {}", r.p_value);
    }

    #[test]
    fn pure_noise_p_value_is_not_extreme() {
        // Images carry no class signal, so own-vs-other contrast is null.
        let len = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let images: Vec<Tensor<f64>> = (0..60)
            .map(|_| {
                Tensor::from_vec(&[len], (0..len).map(|_| rng.random::<f64>()).collect()).unwrap()
            })
            .collect();
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let (_, _, templates) = planted(1, 3, 0.0, 0);
        let r = template_contrast(&images, &labels, &templates, 999, 7).unwrap();
        assert!(r.p_value > 0.01, "p {}", r.p_value);
    }

    #[test]
    fn p_value_never_reaches_zero() {
        let (images, labels, templates) = planted(5, 2, 0.01, 3);
        let r = template_contrast(&images, &labels, &templates, 9, 0).unwrap();
        assert!(r.p_value >= 1.0 / 10.0);
        assert_eq!(r.n_permutations, 9);
    }

    #[test]
    fn permutation_run_is_deterministic() {
        let (images, labels, templates) = planted(10, 2, 0.5, 8);
        let a = template_contrast(&images, &labels, &templates, 199, 13).unwrap();
        let b = template_contrast(&images, &labels, &templates, 199, 13).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let (images, labels, templates) = planted(2, 2, 0.1, 2);
        assert!(template_contrast(&images, &labels[..1], &templates, 9, 0).is_err());
        assert!(template_contrast(&images, &labels, &templates[..1], 9, 0).is_err());
        assert!(template_contrast(&images, &labels, &templates, 0, 0).is_err());
        let bad_labels = vec![9usize; images.len()];
        assert!(template_contrast(&images, &bad_labels, &templates, 9, 0).is_err());
    }
}
