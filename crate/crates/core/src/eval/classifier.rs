//! Informativity classifiers: one binary CNN per sound class deciding whether
//! a translated image depicts that class. Class index 1 means informative.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::seeded_shuffle;
use crate::error::{S2iError, S2iResult};
use crate::models::{build_classifier, encode_audio, generate_image, ModelSchema};
use crate::nn::layer::Mode;
use crate::nn::net::Network;
use crate::nn::optim::SgdMomentum;
use crate::nn::rng::{RngState, StreamId};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Tensor;

/// Negative log likelihood over log-probabilities [b, k] with integer
/// targets. Gradient is -1/b at each target index.
pub fn nll_loss<F: Scalar>(log_probs: &Tensor<F>, targets: &[usize]) -> S2iResult<(F, Tensor<F>)> {
    let d = log_probs.dims();
    if d.len() != 2 || d[0] != targets.len() || d[0] == 0 {
        return Err(S2iError::shape(
            "nll_loss",
            format!("[{}, k]", targets.len()),
            format!("{d:?}"),
        ));
    }
    let (b, k) = (d[0], d[1]);
    if let Some(&t) = targets.iter().find(|&&t| t >= k) {
        return Err(S2iError::Data(format!("target {t} out of range for {k} classes")));
    }
    let bf = F::from_usize(b);
    let mut loss = F::zero();
    let mut grad = Tensor::zeros(d);
    for (i, &t) in targets.iter().enumerate() {
        loss = loss - log_probs.data()[i * k + t];
        grad.data_mut()[i * k + t] = F::zero() - F::one() / bf;
    }
    Ok((loss / bf, grad))
}

#[derive(Clone, Debug)]
pub struct LabeledImage<F> {
    /// [3, t, t] in [-1, 1].
    pub image: Tensor<F>,
    pub informative: bool,
    /// Which translator model produced the image (or "real"/"oracle").
    pub model_id: String,
}

#[derive(Clone, Debug)]
pub struct InformativityDataset<F> {
    pub class_name: String,
    pub train: Vec<LabeledImage<F>>,
    pub test: Vec<LabeledImage<F>>,
}

fn count_labels<F>(items: &[LabeledImage<F>]) -> (usize, usize) {
    let pos = items.iter().filter(|i| i.informative).count();
    (pos, items.len() - pos)
}

impl<F> InformativityDataset<F> {
    /// Rejects label imbalance beyond `tolerance` in either split.
    pub fn check_balance(&self, tolerance: usize) -> S2iResult<()> {
        for (name, split) in [("train", &self.train), ("test", &self.test)] {
            let (pos, neg) = count_labels(split);
            if pos.abs_diff(neg) > tolerance {
                return Err(S2iError::Data(format!(
                    "{name} split of {} is imbalanced: {pos} informative vs {neg} not (tolerance {tolerance})",
                    self.class_name
                )));
            }
        }
        Ok(())
    }
}

/// Builds a dataset from per-model image pools: equal image counts per model,
/// exact label balance, stratified train/test split.
pub fn assemble_dataset<F: Scalar>(
    class_name: &str,
    sources: Vec<(String, Vec<LabeledImage<F>>)>,
    train_frac: f64,
    seed: u64,
) -> S2iResult<InformativityDataset<F>> {
    if sources.is_empty() {
        return Err(S2iError::Data("no image sources".into()));
    }
    if !(0.0..1.0).contains(&train_frac) || train_frac == 0.0 {
        return Err(S2iError::Config(format!(
            "train_frac must be in (0, 1), got {train_frac}"
        )));
    }
    let mut rng = RngState::new(seed);
    let rng = rng.stream(StreamId::DataOrder);

    // Per model and label, find the common floor so each model contributes
    // the same number of images per label.
    let per_label_floor = sources
        .iter()
        .map(|(_, imgs)| {
            let (pos, neg) = count_labels(imgs);
            pos.min(neg)
        })
        .min()
        .unwrap();
    if per_label_floor == 0 {
        return Err(S2iError::Data(
            "every source model needs at least one image of each label".into(),
        ));
    }

    let mut pos_all = Vec::new();
    let mut neg_all = Vec::new();
    for (_, imgs) in sources {
        let mut pos: Vec<LabeledImage<F>> = Vec::new();
        let mut neg: Vec<LabeledImage<F>> = Vec::new();
        for img in imgs {
            if img.informative {
                pos.push(img);
            } else {
                neg.push(img);
            }
        }
        for bucket in [&mut pos, &mut neg] {
            let mut idx: Vec<usize> = (0..bucket.len()).collect();
            seeded_shuffle(&mut idx, rng);
            idx.truncate(per_label_floor);
            idx.sort_unstable();
            let mut keep = idx.into_iter();
            let mut next = keep.next();
            let mut i = 0usize;
            bucket.retain(|_| {
                let k = Some(i) == next;
                if k {
                    next = keep.next();
                }
                i += 1;
                k
            });
        }
        pos_all.extend(pos);
        neg_all.extend(neg);
    }

    // Stratified split: identical train counts for both labels.
    let n_train = ((pos_all.len() as f64) * train_frac).floor() as usize;
    if n_train == 0 || n_train == pos_all.len() {
        return Err(S2iError::Data(format!(
            "split leaves an empty side: {} per label, train_frac {train_frac}",
            pos_all.len()
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for bucket in [pos_all, neg_all] {
        let mut idx: Vec<usize> = (0..bucket.len()).collect();
        seeded_shuffle(&mut idx, rng);
        let train_idx: std::collections::HashSet<usize> = idx[..n_train].iter().copied().collect();
        for (i, img) in bucket.into_iter().enumerate() {
            if train_idx.contains(&i) {
                train.push(img);
            } else {
                test.push(img);
            }
        }
    }

    Ok(InformativityDataset {
        class_name: class_name.to_string(),
        train,
        test,
    })
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Allowed |informative - noninformative| count difference per split.
    pub balance_tolerance: usize,
}

impl ClassifierConfig {
    pub fn reference(seed: u64) -> Self {
        ClassifierConfig {
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 5e-5,
            batch_size: 64,
            epochs: 30,
            seed,
            balance_tolerance: 0,
        }
    }

    pub fn tiny(seed: u64) -> Self {
        ClassifierConfig {
            batch_size: 8,
            epochs: 20,
            ..ClassifierConfig::reference(seed)
        }
    }
}

pub struct TrainedClassifier {
    pub net: Network<f32>,
    pub class_name: String,
    pub holdout_accuracy: f64,
    pub train_losses: Vec<f64>,
}

fn stack_images<F: Scalar>(items: &[LabeledImage<F>], idxs: &[usize]) -> (Tensor<F>, Vec<usize>) {
    let dims = items[idxs[0]].image.dims().to_vec();
    let n: usize = dims.iter().product();
    let mut out = Tensor::zeros(&[idxs.len(), dims[0], dims[1], dims[2]]);
    let mut targets = Vec::with_capacity(idxs.len());
    for (slot, &i) in idxs.iter().enumerate() {
        out.data_mut()[slot * n..(slot + 1) * n].copy_from_slice(items[i].image.data());
        targets.push(items[i].informative as usize);
    }
    (out, targets)
}

/// Predicted class indices (argmax over log-probs) for a stack of images.
pub fn classify<F: Scalar>(
    net: &mut Network<F>,
    images: &Tensor<F>,
    rng: &mut ChaCha8Rng,
) -> S2iResult<Vec<usize>> {
    let out = net.forward(images, Mode::Eval, rng, false)?;
    let d = out.dims();
    if d.len() != 2 {
        return Err(S2iError::shape("classifier output", "[b, k]", format!("{d:?}")));
    }
    let (b, k) = (d[0], d[1]);
    let mut preds = Vec::with_capacity(b);
    for i in 0..b {
        let row = &out.data()[i * k..(i + 1) * k];
        let mut best = 0;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        preds.push(best);
    }
    Ok(preds)
}

/// SGD with momentum and weight decay on the schema's classifier stack.
/// Reports held-out accuracy on the dataset's test split.
pub fn train_informativity_classifier(
    schema: &ModelSchema,
    ds: &InformativityDataset<f32>,
    cfg: &ClassifierConfig,
) -> S2iResult<TrainedClassifier> {
    ds.check_balance(cfg.balance_tolerance)?;
    if ds.train.len() < cfg.batch_size {
        return Err(S2iError::Data(format!(
            "need at least one full batch: {} train images < batch_size {}",
            ds.train.len(),
            cfg.batch_size
        )));
    }
    if ds.test.is_empty() {
        return Err(S2iError::Data("empty test split".into()));
    }

    let mut rng = RngState::new(cfg.seed);
    let mut net = build_classifier::<f32>(schema, rng.stream(StreamId::Init))?;
    let mut opt = SgdMomentum::<f32>::new(cfg.lr, cfg.momentum, cfg.weight_decay);

    let mut train_losses = Vec::with_capacity(cfg.epochs);
    for _epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..ds.train.len()).collect();
        seeded_shuffle(&mut order, rng.stream(StreamId::DataOrder));
        let mut sum = 0.0f64;
        let mut batches = 0usize;
        for idxs in order.chunks_exact(cfg.batch_size) {
            let (images, targets) = stack_images(&ds.train, idxs);
            let log_probs = net.forward(&images, Mode::Train, rng.stream(StreamId::Dropout), true)?;
            let (loss, dloss) = nll_loss(&log_probs, &targets)?;
            let loss = loss.to_f64();
            if !loss.is_finite() {
                return Err(S2iError::NonFinite {
                    context: format!("classifier loss for {}", ds.class_name),
                    iteration: batches as u64,
                    checkpoint: None,
                });
            }
            net.zero_grads();
            net.backward(&dloss)?;
            opt.step(&mut net)?;
            sum += loss;
            batches += 1;
        }
        train_losses.push(sum / batches as f64);
    }

    let idxs: Vec<usize> = (0..ds.test.len()).collect();
    let (images, targets) = stack_images(&ds.test, &idxs);
    let preds = classify(&mut net, &images, rng.stream(StreamId::Dropout))?;
    let correct = preds
        .iter()
        .zip(targets.iter())
        .filter(|(p, t)| p == t)
        .count();
    let holdout_accuracy = correct as f64 / targets.len() as f64;

    Ok(TrainedClassifier {
        net,
        class_name: ds.class_name.clone(),
        holdout_accuracy,
        train_losses,
    })
}

#[derive(Serialize, Deserialize)]
struct ClassifierMeta {
    phase: String,
    class_name: String,
    holdout_accuracy: f64,
    train_losses: Vec<f64>,
    config: ClassifierConfig,
}

/// Checkpoint layout mirrors the training phases: schema JSON plus named
/// parameter and state tensors, with classifier metadata in the header.
pub fn save_classifier(
    path: &std::path::Path,
    schema: &ModelSchema,
    clf: &mut TrainedClassifier,
    cfg: &ClassifierConfig,
) -> S2iResult<()> {
    let meta = ClassifierMeta {
        phase: "clf".into(),
        class_name: clf.class_name.clone(),
        holdout_accuracy: clf.holdout_accuracy,
        train_losses: clf.train_losses.clone(),
        config: cfg.clone(),
    };
    let mut tensors = Vec::new();
    clf.net.visit_params(&mut |name, p, _| {
        tensors.push((name, p.dims().to_vec(), p.data().to_vec()));
    });
    clf.net.visit_state(&mut |name, s| {
        tensors.push((name, s.dims().to_vec(), s.data().to_vec()));
    });
    let data = crate::io::CheckpointData {
        schema_json: schema.canonical_json(),
        meta_json: serde_json::to_string(&meta)
            .map_err(|e| S2iError::Data(format!("classifier meta: {e}")))?,
        tensors,
    };
    crate::io::write_checkpoint(path, &data)
}

pub fn load_classifier(
    path: &std::path::Path,
) -> S2iResult<(ModelSchema, TrainedClassifier, ClassifierConfig)> {
    let data = crate::io::read_checkpoint(path)?;
    let meta: ClassifierMeta = serde_json::from_str(&data.meta_json)
        .map_err(|e| S2iError::format(path.display().to_string(), format!("bad meta: {e}")))?;
    if meta.phase != "clf" {
        return Err(S2iError::format(
            path.display().to_string(),
            format!("expected a classifier checkpoint, found phase {:?}", meta.phase),
        ));
    }
    let schema = ModelSchema::from_json(&data.schema_json)?;
    let mut rng = RngState::new(0);
    let mut net = build_classifier::<f32>(&schema, rng.stream(StreamId::Init))?;
    crate::training::restore_into(&data, &schema, &mut [&mut net], &mut [])?;
    Ok((
        schema,
        TrainedClassifier {
            net,
            class_name: meta.class_name,
            holdout_accuracy: meta.holdout_accuracy,
            train_losses: meta.train_losses,
        },
        meta.config,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    /// (class name, informative fraction), ordered by class index.
    pub per_class: Vec<(String, f64)>,
    pub macro_avg: f64,
}

/// Translates each sound once in eval mode, batched, returning one
/// [3, s, s] image per [rows, cols] spectrogram in input order.
pub fn translate_sounds(
    schema: &ModelSchema,
    enc: &mut Network<f32>,
    gen: &mut Network<f32>,
    sounds: &[Tensor<f32>],
    batch_size: usize,
    seed: u64,
) -> S2iResult<Vec<Tensor<f32>>> {
    if sounds.is_empty() {
        return Err(S2iError::Data("no sounds to translate".into()));
    }
    if batch_size == 0 {
        return Err(S2iError::Config("batch_size must be >= 1".into()));
    }
    let mut rng = RngState::new(seed);
    let (rows, cols) = (sounds[0].dims()[0], sounds[0].dims()[1]);
    let mut out = Vec::with_capacity(sounds.len());
    for chunk in sounds.chunks(batch_size) {
        let b = chunk.len();
        let mut spec = Tensor::<f32>::zeros(&[b, 1, rows, cols]);
        for (slot, s) in chunk.iter().enumerate() {
            spec.data_mut()[slot * rows * cols..(slot + 1) * rows * cols]
                .copy_from_slice(s.data());
        }
        let emb = encode_audio(schema, enc, &spec, Mode::Eval, rng.stream(StreamId::Dropout))?;
        let images =
            generate_image(schema, gen, &emb, Mode::Eval, rng.stream(StreamId::Dropout))?;
        let dims = images.dims().to_vec();
        let img_len: usize = dims[1..].iter().product();
        for i in 0..b {
            out.push(Tensor::from_vec(
                &dims[1..],
                images.data()[i * img_len..(i + 1) * img_len].to_vec(),
            )?);
        }
    }
    Ok(out)
}

/// Translates held-out sounds and asks each class's classifier whether its
/// own translations look informative. `sounds` pairs a [rows, cols]
/// spectrogram with its class index; classifiers are indexed by class.
pub fn informativity_rate(
    schema: &ModelSchema,
    enc: &mut Network<f32>,
    gen: &mut Network<f32>,
    sounds: &[(Tensor<f32>, usize)],
    classifiers: &mut [TrainedClassifier],
    batch_size: usize,
    seed: u64,
) -> S2iResult<RateReport> {
    if sounds.is_empty() {
        return Err(S2iError::Data("no test sounds".into()));
    }
    if batch_size == 0 {
        return Err(S2iError::Config("batch_size must be >= 1".into()));
    }
    let n_classes = classifiers.len();
    if let Some(&(_, k)) = sounds.iter().find(|(_, k)| *k >= n_classes) {
        return Err(S2iError::Data(format!(
            "sound of class {k} has no classifier ({n_classes} provided)"
        )));
    }

    let mut rng = RngState::new(seed);
    let (rows, cols) = (sounds[0].0.dims()[0], sounds[0].0.dims()[1]);
    let mut informative = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];

    for chunk in sounds.chunks(batch_size) {
        let b = chunk.len();
        let mut spec = Tensor::<f32>::zeros(&[b, 1, rows, cols]);
        for (slot, (s, _)) in chunk.iter().enumerate() {
            spec.data_mut()[slot * rows * cols..(slot + 1) * rows * cols]
                .copy_from_slice(s.data());
        }
        let emb = encode_audio(schema, enc, &spec, Mode::Eval, rng.stream(StreamId::Dropout))?;
        let images =
            generate_image(schema, gen, &emb, Mode::Eval, rng.stream(StreamId::Dropout))?;

        // Each class's classifier sees only its own sounds' translations.
        let img_len: usize = images.dims()[1..].iter().product();
        for class in 0..n_classes {
            let members: Vec<usize> = (0..b).filter(|&i| chunk[i].1 == class).collect();
            if members.is_empty() {
                continue;
            }
            let dims = images.dims();
            let mut stack = Tensor::<f32>::zeros(&[members.len(), dims[1], dims[2], dims[3]]);
            for (slot, &i) in members.iter().enumerate() {
                stack.data_mut()[slot * img_len..(slot + 1) * img_len]
                    .copy_from_slice(&images.data()[i * img_len..(i + 1) * img_len]);
            }
            let preds = classify(
                &mut classifiers[class].net,
                &stack,
                rng.stream(StreamId::Dropout),
            )?;
            informative[class] += preds.iter().filter(|&&p| p == 1).count();
            totals[class] += members.len();
        }
    }

    let mut per_class = Vec::with_capacity(n_classes);
    let mut sum = 0.0f64;
    let mut present = 0usize;
    for class in 0..n_classes {
        if totals[class] == 0 {
            continue;
        }
        let rate = informative[class] as f64 / totals[class] as f64;
        per_class.push((classifiers[class].class_name.clone(), rate));
        sum += rate;
        present += 1;
    }
    Ok(RateReport {
        per_class,
        macro_avg: sum / present as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Profile, SchemaOptions};

    fn flat_image(t: usize, r: f32, g: f32, b: f32) -> Tensor<f32> {
        let mut img = Tensor::zeros(&[3, t, t]);
        let n = t * t;
        img.data_mut()[..n].fill(r);
        img.data_mut()[n..2 * n].fill(g);
        img.data_mut()[2 * n..].fill(b);
        img
    }

    fn tiny_schema() -> ModelSchema {
        ModelSchema::new(Profile::Tiny, 8, SchemaOptions::default()).unwrap()
    }

    #[test]
    fn nll_matches_hand_computation_and_grad_positions() {
        // log p rows: ln(0.25) everywhere for 4 classes.
        let lp = Tensor::from_vec(&[2, 4], vec![0.25f64.ln(); 8]).unwrap();
        let (loss, grad) = nll_loss(&lp, &[1, 3]).unwrap();
        assert!((loss - (-(0.25f64.ln()))).abs() < 1e-12);
        let g = grad.data();
        assert_eq!(g[1], -0.5);
        assert_eq!(g[7], -0.5);
        assert_eq!(g.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn nll_rejects_bad_targets() {
        let lp = Tensor::from_vec(&[1, 2], vec![-0.5f64, -1.0]).unwrap();
        assert!(nll_loss(&lp, &[2]).is_err());
        assert!(nll_loss(&lp, &[0, 1]).is_err());
    }

    fn separable_dataset(n_per_label: usize, t: usize) -> InformativityDataset<f32> {
        // Informative = red-ish, non-informative = blue-ish.
        let make = |informative: bool, i: usize| {
            let shade = 0.5 + 0.4 * (i as f32 / n_per_label as f32);
            let image = if informative {
                flat_image(t, shade, -0.8, -0.8)
            } else {
                flat_image(t, -0.8, -0.8, shade)
            };
            LabeledImage {
                image,
                informative,
                model_id: "oracle".into(),
            }
        };
        let split = |lo: usize, hi: usize| -> Vec<LabeledImage<f32>> {
            (lo..hi)
                .flat_map(|i| [make(true, i), make(false, i)])
                .collect()
        };
        InformativityDataset {
            class_name: "red_vs_blue".into(),
            train: split(0, n_per_label * 4 / 5),
            test: split(n_per_label * 4 / 5, n_per_label),
        }
    }

    #[test]
    fn separable_images_reach_high_holdout_accuracy() {
        let schema = tiny_schema();
        let ds = separable_dataset(40, schema.profile.image_size());
        let cfg = ClassifierConfig::tiny(7);
        let clf = train_informativity_classifier(&schema, &ds, &cfg).unwrap();
        assert!(
            clf.holdout_accuracy >= 0.99,
            "accuracy {}",
            clf.holdout_accuracy
        );
    }

    fn randomize_labels(items: &mut [LabeledImage<f32>], seed: u64) {
        // Balanced but independent of image content.
        let mut rng = RngState::new(seed);
        let mut idx: Vec<usize> = (0..items.len()).collect();
        seeded_shuffle(&mut idx, rng.stream(StreamId::DataOrder));
        for (rank, &i) in idx.iter().enumerate() {
            items[i].informative = rank < items.len() / 2;
        }
    }

    #[test]
    fn shuffled_labels_sit_near_chance() {
        let schema = tiny_schema();
        let mut ds = separable_dataset(150, schema.profile.image_size());
        randomize_labels(&mut ds.train, 100);
        randomize_labels(&mut ds.test, 101);
        let mut cfg = ClassifierConfig::tiny(11);
        cfg.epochs = 4;
        let clf = train_informativity_classifier(&schema, &ds, &cfg).unwrap();
        assert!(
            (0.40..=0.60).contains(&clf.holdout_accuracy),
            "accuracy {}",
            clf.holdout_accuracy
        );
    }

    #[test]
    fn imbalanced_dataset_is_rejected() {
        let schema = tiny_schema();
        let mut ds = separable_dataset(20, schema.profile.image_size());
        // Drop half the non-informative train images.
        let mut dropped = 0;
        ds.train.retain(|img| {
            if !img.informative && dropped < 8 {
                dropped += 1;
                false
            } else {
                true
            }
        });
        let cfg = ClassifierConfig::tiny(3);
        let err = train_informativity_classifier(&schema, &ds, &cfg).err().unwrap();
        assert!(err.to_string().contains("imbalanced"), "{err}");
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let schema = tiny_schema();
        let ds = separable_dataset(20, schema.profile.image_size());
        let mut cfg = ClassifierConfig::tiny(5);
        cfg.epochs = 3;
        let a = train_informativity_classifier(&schema, &ds, &cfg).unwrap();
        let b = train_informativity_classifier(&schema, &ds, &cfg).unwrap();
        assert_eq!(a.train_losses, b.train_losses);
        let (mut na, mut nb) = (a.net, b.net);
        assert_eq!(na.param_bytes(), nb.param_bytes());
    }

    #[test]
    fn classifier_round_trips_through_checkpoint() {
        let schema = tiny_schema();
        let ds = separable_dataset(20, schema.profile.image_size());
        let mut cfg = ClassifierConfig::tiny(5);
        cfg.epochs = 2;
        let mut clf = train_informativity_classifier(&schema, &ds, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clf_red.s2ic");
        save_classifier(&path, &schema, &mut clf, &cfg).unwrap();
        let (schema2, mut loaded, cfg2) = load_classifier(&path).unwrap();
        assert_eq!(schema2, schema);
        assert_eq!(cfg2, cfg);
        assert_eq!(loaded.class_name, clf.class_name);
        assert_eq!(loaded.holdout_accuracy, clf.holdout_accuracy);
        assert_eq!(loaded.train_losses, clf.train_losses);
        assert_eq!(loaded.net.param_bytes(), clf.net.param_bytes());
    }

    #[test]
    fn assemble_balances_labels_and_models() {
        let t = 8;
        let mk = |informative: bool, id: &str| LabeledImage {
            image: flat_image(t, 0.1, 0.2, 0.3),
            informative,
            model_id: id.to_string(),
        };
        // Model a: 6 pos, 4 neg. Model b: 3 pos, 9 neg. Floor = 3 per label.
        let a: Vec<_> = (0..6).map(|_| mk(true, "a")).chain((0..4).map(|_| mk(false, "a"))).collect();
        let b: Vec<_> = (0..3).map(|_| mk(true, "b")).chain((0..9).map(|_| mk(false, "b"))).collect();
        let ds = assemble_dataset("c", vec![("a".into(), a), ("b".into(), b)], 0.5, 9).unwrap();
        let all: Vec<_> = ds.train.iter().chain(ds.test.iter()).collect();
        assert_eq!(all.len(), 12);
        for id in ["a", "b"] {
            let from = all.iter().filter(|i| i.model_id == id);
            assert_eq!(from.clone().count(), 6);
            assert_eq!(from.filter(|i| i.informative).count(), 3);
        }
        ds.check_balance(0).unwrap();
        // Stratified split keeps balance on both sides.
        let (tp, tn) = (
            ds.train.iter().filter(|i| i.informative).count(),
            ds.train.iter().filter(|i| !i.informative).count(),
        );
        assert_eq!(tp, tn);
    }

    #[test]
    fn rate_counts_match_fixed_predictions() {
        // A classifier with a forced constant head is heavy to build here;
        // instead check the counting path with a real but untrained net on
        // tiny inputs: rates must be in [0, 1] and macro equal to the mean.
        let schema = tiny_schema();
        let mut rng = RngState::new(2);
        let enc = crate::models::build_network::<f32>(
            "a_enc",
            &schema.audio_encoder,
            rng.stream(StreamId::Init),
        )
        .unwrap();
        let gen = crate::models::build_network::<f32>(
            "gen",
            &schema.generator,
            rng.stream(StreamId::Init),
        )
        .unwrap();
        let clf_net = build_classifier::<f32>(&schema, rng.stream(StreamId::Init)).unwrap();
        let clf_net2 = build_classifier::<f32>(&schema, rng.stream(StreamId::Init)).unwrap();
        let mut classifiers = vec![
            TrainedClassifier {
                net: clf_net,
                class_name: "c0".into(),
                holdout_accuracy: 0.0,
                train_losses: vec![],
            },
            TrainedClassifier {
                net: clf_net2,
                class_name: "c1".into(),
                holdout_accuracy: 0.0,
                train_losses: vec![],
            },
        ];
        let (rows, cols) = schema.profile.spectrogram_shape();
        let sounds: Vec<(Tensor<f32>, usize)> = (0..6)
            .map(|i| {
                let mut s = Tensor::zeros(&[rows, cols]);
                s.fill(if i % 2 == 0 { 0.3 } else { -0.3 });
                (s, i % 2)
            })
            .collect();
        let (mut enc, mut gen) = (enc, gen);
        let report = informativity_rate(
            &schema,
            &mut enc,
            &mut gen,
            &sounds,
            &mut classifiers,
            4,
            77,
        )
        .unwrap();
        assert_eq!(report.per_class.len(), 2);
        for (_, r) in &report.per_class {
            assert!((0.0..=1.0).contains(r));
        }
        let mean = report.per_class.iter().map(|(_, r)| r).sum::<f64>() / 2.0;
        assert_eq!(report.macro_avg, mean);
    }

    #[test]
    fn rate_requires_classifier_for_every_class() {
        let schema = tiny_schema();
        let mut rng = RngState::new(4);
        let mut enc = crate::models::build_network::<f32>(
            "a_enc",
            &schema.audio_encoder,
            rng.stream(StreamId::Init),
        )
        .unwrap();
        let mut gen = crate::models::build_network::<f32>(
            "gen",
            &schema.generator,
            rng.stream(StreamId::Init),
        )
        .unwrap();
        let (rows, cols) = schema.profile.spectrogram_shape();
        let sounds = vec![(Tensor::<f32>::zeros(&[rows, cols]), 1usize)];
        let err = informativity_rate(&schema, &mut enc, &mut gen, &sounds, &mut [], 4, 0)
            .err()
            .unwrap();
        assert!(err.to_string().contains("no classifier"), "{err}");
    }
}
