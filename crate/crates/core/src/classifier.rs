//! The target model `f`: training, persistence, and querying under the IID
//! assumption. The defense wraps this model without ever retraining it.

use crate::datamodel::{Dataset, DistributionTag, Image, PredictionResult};
use crate::nn::{
    batch_from_images, softmax, softmax_cross_entropy, squeeze_logits, unsqueeze_logits,
    BatchNorm2d, Conv2d, Dense, GlobalAvgPool, Layer, MaxPool2d, Optimizer, ProjectedResidualBlock,
    Relu, ResidualBlock, Sequential, Sgd, Tensor,
};
use crate::util::{rng_for, Rng};
use crate::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Mutex;

/// Architecture description; everything needed to rebuild the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    /// (H, W, C) of the expected input.
    pub input: (usize, usize, usize),
    pub class_count: usize,
    pub kind: ArchKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ArchKind {
    /// Two 5x5 conv + pool stages and two dense layers; the desk model for
    /// 28x28 grayscale digits.
    ConvSmall { c1: usize, c2: usize, hidden: usize },
    /// An 18-layer residual network (4 stages of two basic blocks each) for
    /// 32x32 color input.
    ResNet18 { base: usize },
}

impl ArchSpec {
    pub fn conv_small(input: (usize, usize, usize), class_count: usize) -> Self {
        ArchSpec {
            input,
            class_count,
            kind: ArchKind::ConvSmall {
                c1: 16,
                c2: 32,
                hidden: 128,
            },
        }
    }

    pub fn resnet18(input: (usize, usize, usize), class_count: usize, base: usize) -> Self {
        ArchSpec {
            input,
            class_count,
            kind: ArchKind::ResNet18 { base },
        }
    }

    /// Width of the layer feeding the classification head.
    pub fn penultimate_dim(&self) -> usize {
        match self.kind {
            ArchKind::ConvSmall { hidden, .. } => hidden,
            ArchKind::ResNet18 { base } => base * 8,
        }
    }

    /// Build the feature tower and classification head.
    fn build(&self, rng: &mut Rng) -> (Sequential, Dense) {
        let (h, w, c) = self.input;
        match self.kind {
            ArchKind::ConvSmall { c1, c2, hidden } => {
                assert!(h % 4 == 0 && w % 4 == 0, "conv_small needs dims divisible by 4");
                let flat = c2 * (h / 4) * (w / 4);
                let features = Sequential::new(vec![
                    Box::new(Conv2d::new(c, c1, 5, 1, 2, rng)),
                    Box::new(Relu::new()),
                    Box::new(MaxPool2d::new()),
                    Box::new(Conv2d::new(c1, c2, 5, 1, 2, rng)),
                    Box::new(Relu::new()),
                    Box::new(MaxPool2d::new()),
                    Box::new(Dense::new(flat, hidden, rng)),
                    Box::new(Relu::new()),
                ]);
                let head = Dense::new_zeroed(hidden, self.class_count);
                (features, head)
            }
            ArchKind::ResNet18 { base } => {
                let mut layers: Vec<Box<dyn Layer>> = vec![
                    Box::new(Conv2d::new(c, base, 3, 1, 1, rng)),
                    Box::new(BatchNorm2d::new(base)),
                    Box::new(Relu::new()),
                ];
                let widths = [base, base * 2, base * 4, base * 8];
                let mut in_w = base;
                for (stage, &width) in widths.iter().enumerate() {
                    let stride = if stage == 0 { 1 } else { 2 };
                    layers.push(basic_block(in_w, width, stride, rng));
                    layers.push(Box::new(Relu::new()));
                    layers.push(basic_block(width, width, 1, rng));
                    layers.push(Box::new(Relu::new()));
                    in_w = width;
                }
                layers.push(Box::new(GlobalAvgPool::new()));
                let features = Sequential::new(layers);
                let head = Dense::new_zeroed(base * 8, self.class_count);
                (features, head)
            }
        }
    }
}

fn basic_block(in_w: usize, out_w: usize, stride: usize, rng: &mut Rng) -> Box<dyn Layer> {
    let inner = Sequential::new(vec![
        Box::new(Conv2d::new(in_w, out_w, 3, stride, 1, rng)),
        Box::new(BatchNorm2d::new(out_w)),
        Box::new(Relu::new()),
        Box::new(Conv2d::new(out_w, out_w, 3, 1, 1, rng)),
        Box::new(BatchNorm2d::new(out_w)),
    ]);
    if stride == 1 && in_w == out_w {
        Box::new(ResidualBlock::new(inner))
    } else {
        let shortcut = Sequential::new(vec![
            Box::new(Conv2d::new(in_w, out_w, 1, stride, 0, rng)),
            Box::new(BatchNorm2d::new(out_w)),
        ]);
        Box::new(ProjectedResidualBlock::new(inner, shortcut))
    }
}

/// Training hyperparameters. SGD with momentum and a cosine-decayed rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Fraction of the training set held out for the reported accuracy.
    pub holdout_fraction: f64,
    /// Std of Gaussian pixel noise added during training (0 disables).
    pub noise_std: f64,
    /// Max random shift in pixels applied during training (0 disables).
    pub shift: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 6,
            batch_size: 64,
            lr: 0.05,
            momentum: 0.9,
            holdout_fraction: 0.1,
            noise_std: 0.0,
            shift: 0,
        }
    }
}

/// A trained classifier. Inference is deterministic; the network lives
/// behind a mutex because layer forward passes cache activations.
pub struct ClassifierModel {
    arch: ArchSpec,
    net: Mutex<(Sequential, Dense)>,
    train_tag: DistributionTag,
    holdout_accuracy: f64,
    seed: u64,
}

impl ClassifierModel {
    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn class_count(&self) -> usize {
        self.arch.class_count
    }

    pub fn train_tag(&self) -> &DistributionTag {
        &self.train_tag
    }

    /// Held-out accuracy measured at the end of training (NaN if no holdout).
    pub fn holdout_accuracy(&self) -> f64 {
        self.holdout_accuracy
    }

    fn check_shape(&self, img: &Image) -> Result<()> {
        if img.shape() != self.arch.input {
            return Err(Error::shape(
                format!("{:?}", self.arch.input),
                format!("{:?}", img.shape()),
            ));
        }
        Ok(())
    }

    /// Logits for a batch in NCHW layout.
    pub fn logits_batch(&self, x: &Tensor) -> Array2<f64> {
        let mut guard = self.net.lock().expect("net lock");
        let (features, head) = &mut *guard;
        let mut r = crate::util::rng(0);
        let feat = features.forward(x, false, &mut r);
        let out = head.forward(&feat, false, &mut r);
        squeeze_logits(&out)
    }

    /// Penultimate-layer embeddings for a batch: (N, D).
    pub fn penultimate_batch(&self, x: &Tensor) -> Array2<f64> {
        let mut guard = self.net.lock().expect("net lock");
        let (features, _) = &mut *guard;
        let mut r = crate::util::rng(0);
        let feat = features.forward(x, false, &mut r);
        squeeze_logits(&feat)
    }

    /// Cross-entropy loss and its gradient with respect to the input batch.
    /// Parameter gradients accumulated along the way are discarded.
    pub fn loss_input_grad(&self, x: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
        let mut guard = self.net.lock().expect("net lock");
        let (features, head) = &mut *guard;
        let mut r = crate::util::rng(0);
        let feat = features.forward(x, false, &mut r);
        let logits = squeeze_logits(&head.forward(&feat, false, &mut r));
        let (loss, grad_logits) = softmax_cross_entropy(&logits, labels);
        let g_feat = head.backward(&unsqueeze_logits(&grad_logits));
        let gx = features.backward(&g_feat);
        features.zero_grad();
        head.zero_grad();
        if !gx.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok((loss, gx))
    }

    /// Gradient of `sum(seed_grad * logits)` with respect to the input batch,
    /// for attacks that differentiate a custom function of the logits.
    pub fn logits_input_grad(&self, x: &Tensor, seed_grad: &Array2<f64>) -> Result<Tensor> {
        let mut guard = self.net.lock().expect("net lock");
        let (features, head) = &mut *guard;
        let mut r = crate::util::rng(0);
        let feat = features.forward(x, false, &mut r);
        let _ = head.forward(&feat, false, &mut r);
        let g_feat = head.backward(&unsqueeze_logits(seed_grad));
        let gx = features.backward(&g_feat);
        features.zero_grad();
        head.zero_grad();
        if !gx.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok(gx)
    }

    pub fn predict_batch(&self, images: &[&Image]) -> Result<Vec<PredictionResult>> {
        for img in images {
            self.check_shape(img)?;
        }
        let x = batch_from_images(images);
        let logits = self.logits_batch(&x);
        let probs = softmax(&logits);
        (0..images.len())
            .map(|i| PredictionResult::from_probabilities(probs.row(i).to_vec()))
            .collect()
    }

    pub fn predict(&self, img: &Image) -> Result<PredictionResult> {
        Ok(self.predict_batch(&[img])?.pop().expect("one result"))
    }

    /// Content hash over architecture and parameters.
    pub fn fingerprint(&self) -> String {
        let guard = self.net.lock().expect("net lock");
        let (features, head) = &*guard;
        let arch_json = serde_json::to_vec(&self.arch).expect("arch serializes");
        let mut chunks: Vec<Vec<u8>> = vec![arch_json];
        for p in features
            .export_params()
            .iter()
            .chain(head.params().iter().map(|p| &p.value))
        {
            let mut buf = Vec::with_capacity(p.len() * 8);
            for &v in p.iter() {
                buf.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            chunks.push(buf);
        }
        crate::util::sha256_chunks(chunks.iter().map(|c| c.as_slice()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let guard = self.net.lock().expect("net lock");
        let (features, head) = &*guard;
        let meta = CheckpointMeta {
            version: 1,
            arch: self.arch.clone(),
            train_tag: self.train_tag.as_str().to_string(),
            holdout_accuracy: if self.holdout_accuracy.is_nan() {
                None
            } else {
                Some(self.holdout_accuracy)
            },
            seed: self.seed,
        };
        std::fs::write(dir.join("arch.json"), serde_json::to_vec_pretty(&meta)?)
            .map_err(|e| Error::io(dir, e))?;
        let params_dir = dir.join("params");
        std::fs::create_dir_all(&params_dir).map_err(|e| Error::io(&params_dir, e))?;
        let mut all = features.export_params();
        all.extend(head.params().iter().map(|p| p.value.clone()));
        for (i, p) in all.iter().enumerate() {
            crate::datamodel::write_tensor_f64(&params_dir.join(format!("p{i:04}.otn")), p)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ClassifierModel> {
        let meta_path = dir.join("arch.json");
        let bytes = std::fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: CheckpointMeta = serde_json::from_slice(&bytes)?;
        let mut r = rng_for(meta.seed, 0);
        let (mut features, mut head) = meta.arch.build(&mut r);
        let n_feat = features.export_params().len();
        let n_head = head.params().len();
        let params_dir = dir.join("params");
        let mut all = Vec::with_capacity(n_feat + n_head);
        for i in 0..n_feat + n_head {
            all.push(crate::datamodel::read_tensor_f64(
                &params_dir.join(format!("p{i:04}.otn")),
            )?);
        }
        let head_params = all.split_off(n_feat);
        features.import_params(all)?;
        for (p, v) in head.params_mut().into_iter().zip(head_params) {
            if p.value.shape() != v.shape() {
                return Err(Error::shape(
                    format!("{:?}", p.value.shape()),
                    format!("{:?}", v.shape()),
                ));
            }
            p.value = v;
        }
        Ok(ClassifierModel {
            arch: meta.arch,
            net: Mutex::new((features, head)),
            train_tag: DistributionTag::new(meta.train_tag)?,
            holdout_accuracy: meta.holdout_accuracy.unwrap_or(f64::NAN),
            seed: meta.seed,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    version: u32,
    arch: ArchSpec,
    train_tag: String,
    /// None when training kept no holdout split (JSON cannot carry NaN).
    holdout_accuracy: Option<f64>,
    seed: u64,
}

/// Train a classifier with SGD + momentum and a cosine-decayed rate.
pub fn train_classifier(
    train: &Dataset,
    arch: ArchSpec,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<ClassifierModel> {
    if hyper.epochs == 0 || hyper.batch_size == 0 || hyper.lr <= 0.0 {
        return Err(Error::validation("epochs, batch_size, and lr must be positive"));
    }
    if train.image_shape() != arch.input {
        return Err(Error::shape(
            format!("{:?}", arch.input),
            format!("{:?}", train.image_shape()),
        ));
    }
    if train.class_count() != arch.class_count {
        return Err(Error::validation(format!(
            "dataset has {} classes, arch expects {}",
            train.class_count(),
            arch.class_count
        )));
    }

    let mut init_rng = rng_for(seed, 0);
    let (mut features, mut head) = arch.build(&mut init_rng);

    // held-out split for the reported accuracy
    let n = train.len();
    let holdout = ((n as f64) * hyper.holdout_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut split_rng = rng_for(seed, 1);
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut split_rng, 0..=i);
        order.swap(i, j);
    }
    let (holdout_idx, train_idx) = order.split_at(holdout);
    if train_idx.is_empty() {
        return Err(Error::validation("holdout fraction leaves no training data"));
    }

    let steps_per_epoch = train_idx.len().div_ceil(hyper.batch_size);
    let total_steps = steps_per_epoch * hyper.epochs;
    let mut opt = Sgd::new(hyper.lr, hyper.momentum, crate::nn::LrSchedule::Cosine, total_steps);

    let mut epoch_rng = rng_for(seed, 2);
    let mut shuffled: Vec<usize> = train_idx.to_vec();
    for epoch in 0..hyper.epochs {
        for i in (1..shuffled.len()).rev() {
            let j = rand::Rng::gen_range(&mut epoch_rng, 0..=i);
            shuffled.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in shuffled.chunks(hyper.batch_size) {
            let images: Vec<&Image> = chunk.iter().map(|&i| &train.examples()[i].image).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train.examples()[i].label).collect();
            let mut x = batch_from_images(&images);
            augment(&mut x, hyper, &mut epoch_rng);

            let mut r = crate::util::rng(0);
            let feat = features.forward(&x, true, &mut r);
            let logits = squeeze_logits(&head.forward(&feat, true, &mut r));
            let (loss, grad_logits) = softmax_cross_entropy(&logits, &labels);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss;

            features.zero_grad();
            head.zero_grad();
            let g_feat = head.backward(&unsqueeze_logits(&grad_logits));
            let _ = features.backward(&g_feat);
            let mut params = features.params_mut();
            params.extend(head.params_mut());
            opt.step(&mut params);
        }
        log::debug!(
            "epoch {epoch}: mean loss {:.4}, lr {:.5}",
            epoch_loss / steps_per_epoch as f64,
            opt.current_lr()
        );
    }

    let model = ClassifierModel {
        arch,
        net: Mutex::new((features, head)),
        train_tag: train.tag().clone(),
        holdout_accuracy: 0.0,
        seed,
    };

    let holdout_accuracy = if holdout_idx.is_empty() {
        f64::NAN
    } else {
        let mut correct = 0usize;
        for chunk in holdout_idx.chunks(256) {
            let images: Vec<&Image> = chunk.iter().map(|&i| &train.examples()[i].image).collect();
            let preds = model.predict_batch(&images)?;
            for (&i, p) in chunk.iter().zip(&preds) {
                if p.label() == train.examples()[i].label {
                    correct += 1;
                }
            }
        }
        correct as f64 / holdout_idx.len() as f64
    };
    log::info!("held-out accuracy: {holdout_accuracy:.4}");

    Ok(ClassifierModel {
        holdout_accuracy,
        ..model
    })
}

fn augment(x: &mut Tensor, hyper: &TrainHyper, rng: &mut Rng) {
    use rand::Rng as _;
    let (n, c, h, w) = x.dim();
    if hyper.shift > 0 {
        let s = hyper.shift as isize;
        for ni in 0..n {
            let dy = rng.gen_range(-s..=s);
            let dx = rng.gen_range(-s..=s);
            if dy == 0 && dx == 0 {
                continue;
            }
            let mut shifted = ndarray::Array3::<f64>::zeros((c, h, w));
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        let sy = y as isize - dy;
                        let sx = xx as isize - dx;
                        if sy >= 0 && (sy as usize) < h && sx >= 0 && (sx as usize) < w {
                            shifted[[ci, y, xx]] = x[[ni, ci, sy as usize, sx as usize]];
                        }
                    }
                }
            }
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        x[[ni, ci, y, xx]] = shifted[[ci, y, xx]];
                    }
                }
            }
        }
    }
    if hyper.noise_std > 0.0 {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, hyper.noise_std).expect("finite std");
        x.mapv_inplace(|v| (v + normal.sample(rng)).clamp(0.0, 1.0));
    }
}

/// Fraction of examples the model labels correctly. Order-invariant.
pub fn accuracy(model: &ClassifierModel, d: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..d.len()).collect();
    for chunk in idx.chunks(256) {
        let images: Vec<&Image> = chunk.iter().map(|&i| &d.examples()[i].image).collect();
        let preds = model.predict_batch(&images)?;
        for (&i, p) in chunk.iter().zip(&preds) {
            if p.label() == d.examples()[i].label {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / d.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::LabeledExample;
    use ndarray::Array3;

    fn tiny_dataset(n: usize, k: usize) -> Dataset {
        let examples: Vec<LabeledExample> = (0..n)
            .map(|i| {
                let label = i % k;
                let mut img = Array3::<f64>::zeros((4, 4, 1));
                // one bright pixel per class
                img[[label / 4, label % 4, 0]] = 1.0;
                LabeledExample {
                    image: Image::new(img).unwrap(),
                    label,
                }
            })
            .collect();
        Dataset::new(examples, k, DistributionTag::benign()).unwrap()
    }

    fn tiny_arch() -> ArchSpec {
        ArchSpec {
            input: (4, 4, 1),
            class_count: 3,
            kind: ArchKind::ConvSmall {
                c1: 4,
                c2: 8,
                hidden: 16,
            },
        }
    }

    #[test]
    fn memorizes_singleton() {
        let d = tiny_dataset(1, 3);
        let hyper = TrainHyper {
            epochs: 1,
            batch_size: 1,
            lr: 0.1,
            holdout_fraction: 0.0,
            ..TrainHyper::default()
        };
        let m = train_classifier(&d, tiny_arch(), &hyper, 3).unwrap();
        let p = m.predict(&d.examples()[0].image).unwrap();
        assert!(p.probabilities()[d.examples()[0].label] > 1.0 / 3.0);
    }

    #[test]
    fn untrained_model_is_roughly_uniform() {
        let mut r = rng_for(1, 0);
        let arch = tiny_arch();
        let (features, head) = arch.build(&mut r);
        let m = ClassifierModel {
            arch,
            net: Mutex::new((features, head)),
            train_tag: DistributionTag::benign(),
            holdout_accuracy: f64::NAN,
            seed: 1,
        };
        let mut rr = crate::util::rng(9);
        let img = Image::new(Array3::from_shape_fn((4, 4, 1), |_| {
            rand::Rng::gen_range(&mut rr, 0.0..1.0)
        }))
        .unwrap();
        let p = m.predict(&img).unwrap();
        let k = 3.0;
        for &prob in p.probabilities() {
            assert!((prob - 1.0 / k).abs() < 0.2 / k, "prob {prob} too far from uniform");
        }
    }

    #[test]
    fn determinism_and_batch_consistency() {
        let d = tiny_dataset(30, 3);
        let hyper = TrainHyper {
            epochs: 2,
            batch_size: 8,
            lr: 0.05,
            holdout_fraction: 0.2,
            ..TrainHyper::default()
        };
        let m1 = train_classifier(&d, tiny_arch(), &hyper, 5).unwrap();
        let m2 = train_classifier(&d, tiny_arch(), &hyper, 5).unwrap();
        assert_eq!(m1.fingerprint(), m2.fingerprint());
        assert_eq!(m1.holdout_accuracy(), m2.holdout_accuracy());

        // prediction is pure: twice on the same input gives identical probs
        let img = &d.examples()[0].image;
        let p1 = m1.predict(img).unwrap();
        let p2 = m1.predict(img).unwrap();
        assert_eq!(p1.probabilities(), p2.probabilities());

        // batch vs single prediction agree on labels
        let images: Vec<&Image> = d.examples().iter().take(8).map(|e| &e.image).collect();
        let batch = m1.predict_batch(&images).unwrap();
        for (img, bp) in images.iter().zip(&batch) {
            assert_eq!(m1.predict(img).unwrap().label(), bp.label());
        }
    }

    #[test]
    fn accuracy_counts_exactly_and_ignores_order() {
        let d = tiny_dataset(9, 3);
        let hyper = TrainHyper {
            epochs: 12,
            batch_size: 4,
            lr: 0.08,
            holdout_fraction: 0.0,
            ..TrainHyper::default()
        };
        let m = train_classifier(&d, tiny_arch(), &hyper, 7).unwrap();
        let acc = accuracy(&m, &d).unwrap();
        let mut manual = 0;
        for ex in d.examples() {
            if m.predict(&ex.image).unwrap().label() == ex.label {
                manual += 1;
            }
        }
        assert_eq!(acc, manual as f64 / 9.0);

        let shuffled = d.subsample(9, 99).unwrap();
        assert_eq!(accuracy(&m, &shuffled).unwrap(), acc);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let d = tiny_dataset(3, 3);
        let hyper = TrainHyper {
            epochs: 1,
            batch_size: 4,
            lr: 0.05,
            holdout_fraction: 0.0,
            ..TrainHyper::default()
        };
        let m = train_classifier(&d, tiny_arch(), &hyper, 7).unwrap();
        let wrong = Image::new(Array3::zeros((8, 8, 1))).unwrap();
        assert!(m.predict(&wrong).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_preserves_predictions() {
        let d = tiny_dataset(12, 3);
        let hyper = TrainHyper {
            epochs: 2,
            batch_size: 4,
            lr: 0.05,
            holdout_fraction: 0.0,
            ..TrainHyper::default()
        };
        let m = train_classifier(&d, tiny_arch(), &hyper, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let loaded = ClassifierModel::load(dir.path()).unwrap();
        assert_eq!(m.fingerprint(), loaded.fingerprint());
        for ex in d.examples() {
            assert_eq!(
                m.predict(&ex.image).unwrap().probabilities(),
                loaded.predict(&ex.image).unwrap().probabilities()
            );
        }
    }
}
