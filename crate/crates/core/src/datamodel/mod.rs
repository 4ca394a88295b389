//! Core types shared by every module: images, labeled datasets, distribution
//! tags, prediction results, experiment configuration.

mod config;
mod io;
mod tensor_file;

pub use config::ExperimentConfig;
pub use io::{load_dataset, load_dataset_tagged, save_png, DatasetFormat};
pub use tensor_file::{
    read_tensor_f64, read_tensor_u32, write_tensor_f64, write_tensor_u32, TensorHeader,
};

use crate::{Error, Result};
use ndarray::{Array3, ArrayView3};
use serde::{Deserialize, Serialize};

/// A single image: an (H, W, C) tensor of finite values in `[0, 1]`.
///
/// Every image in the system goes through [`Image::new`], which enforces the
/// range invariant once, at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array3<f64>,
}

impl Image {
    pub fn new(pixels: Array3<f64>) -> Result<Self> {
        let (h, w, c) = pixels.dim();
        if h == 0 || w == 0 {
            return Err(Error::validation(format!(
                "image dimensions must be positive, got {h}x{w}x{c}"
            )));
        }
        if c != 1 && c != 3 {
            return Err(Error::validation(format!(
                "channel count must be 1 or 3, got {c}"
            )));
        }
        for &v in pixels.iter() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "pixel value {v} outside [0,1]"
                )));
            }
        }
        Ok(Image { pixels })
    }

    /// Clamp into `[0,1]` and construct. For computed images where float
    /// round-off may leave values a hair outside the valid range.
    pub fn new_clamped(mut pixels: Array3<f64>) -> Result<Self> {
        pixels.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Image::new(pixels)
    }

    pub fn pixels(&self) -> ArrayView3<'_, f64> {
        self.pixels.view()
    }

    pub fn into_pixels(self) -> Array3<f64> {
        self.pixels
    }

    /// (H, W, C)
    pub fn shape(&self) -> (usize, usize, usize) {
        self.pixels.dim()
    }
}

/// An image paired with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub image: Image,
    pub label: usize,
}

/// Identifier of the distribution a dataset was drawn from, e.g. `benign`,
/// `pgd-eps0.3`, `dark-0.35`, `mix`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DistributionTag(String);

impl DistributionTag {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::validation("distribution tag must be non-empty"));
        }
        Ok(DistributionTag(name))
    }

    pub fn benign() -> Self {
        DistributionTag("benign".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for DistributionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered, non-empty collection of labeled examples of identical shape.
#[derive(Debug, Clone)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    class_count: usize,
    tag: DistributionTag,
}

impl Dataset {
    pub fn new(
        examples: Vec<LabeledExample>,
        class_count: usize,
        tag: DistributionTag,
    ) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::validation("dataset must be non-empty"));
        }
        if class_count == 0 {
            return Err(Error::validation("class_count must be positive"));
        }
        let shape = examples[0].image.shape();
        for (i, ex) in examples.iter().enumerate() {
            if ex.image.shape() != shape {
                return Err(Error::shape(
                    format!("{shape:?}"),
                    format!("{:?} at example {i}", ex.image.shape()),
                ));
            }
            if ex.label >= class_count {
                return Err(Error::validation(format!(
                    "label {} out of range for {} classes at example {i}",
                    ex.label, class_count
                )));
            }
        }
        Ok(Dataset {
            examples,
            class_count,
            tag,
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn tag(&self) -> &DistributionTag {
        &self.tag
    }

    pub fn with_tag(mut self, tag: DistributionTag) -> Self {
        self.tag = tag;
        self
    }

    /// (H, W, C) common to all examples.
    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.examples[0].image.shape()
    }

    /// Content fingerprint over pixels, labels, class count, and order.
    /// Stable across process runs; used to pin dataset identity in
    /// manifests and to enforce index alignment between paired datasets.
    pub fn fingerprint(&self) -> String {
        let mut chunks: Vec<Vec<u8>> = Vec::with_capacity(self.examples.len() + 1);
        let (h, w, c) = self.image_shape();
        let mut header = Vec::new();
        header.extend_from_slice(&(self.class_count as u64).to_le_bytes());
        for d in [h, w, c] {
            header.extend_from_slice(&(d as u64).to_le_bytes());
        }
        chunks.push(header);
        for ex in &self.examples {
            let mut buf = Vec::with_capacity(8 + h * w * c * 8);
            buf.extend_from_slice(&(ex.label as u64).to_le_bytes());
            for &v in ex.image.pixels().iter() {
                buf.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            chunks.push(buf);
        }
        crate::util::sha256_chunks(chunks.iter().map(|c| c.as_slice()))
    }

    /// Deterministic subsample of `n` examples without replacement.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::validation(format!(
                "subsample size {n} out of range 1..={}",
                self.len()
            )));
        }
        let mut indices: Vec<usize> = (0..self.len()).collect();
        // Fisher-Yates prefix shuffle: the first n slots are a uniform
        // n-subset in uniform order.
        let mut rng = crate::util::rng_for(seed, 0x5a5a);
        for i in 0..n {
            let j = i + rand::Rng::gen_range(&mut rng, 0..self.len() - i);
            indices.swap(i, j);
        }
        let examples = indices[..n]
            .iter()
            .map(|&i| self.examples[i].clone())
            .collect();
        Dataset::new(examples, self.class_count, self.tag.clone())
    }

    /// Write to `dir` as flat binary tensors plus a JSON sidecar.
    /// Round-trips bit-exactly (pixels are stored as raw f64 bits).
    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        tensor_file::save_dataset(self, dir)
    }

    /// Inverse of [`Dataset::save`].
    pub fn load(dir: &std::path::Path) -> Result<Dataset> {
        tensor_file::load_dataset_dir(dir)
    }
}

/// A classifier output: a probability vector plus its argmax label.
///
/// The label is always the argmax of `probabilities` with ties broken toward
/// the lowest class index.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    label: usize,
    probabilities: Vec<f64>,
}

impl PredictionResult {
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::validation("probability vector must be non-empty"));
        }
        let mut sum = 0.0;
        for &p in &probabilities {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!("probability {p} outside [0,1]")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-5 {
            return Err(Error::validation(format!(
                "probabilities sum to {sum}, expected 1 within 1e-5"
            )));
        }
        let label = argmax_lowest(&probabilities);
        Ok(PredictionResult {
            label,
            probabilities,
        })
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn class_count(&self) -> usize {
        self.probabilities.len()
    }
}

/// Index of the maximum value, lowest index on ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn gray(h: usize, w: usize, v: f64) -> Image {
        Image::new(Array3::from_elem((h, w, 1), v)).unwrap()
    }

    #[test]
    fn image_rejects_out_of_range() {
        assert!(Image::new(Array3::from_elem((2, 2, 1), 1.5)).is_err());
        assert!(Image::new(Array3::from_elem((2, 2, 1), -0.1)).is_err());
        assert!(Image::new(Array3::from_elem((2, 2, 1), f64::NAN)).is_err());
        assert!(Image::new(Array3::from_elem((2, 2, 2), 0.5)).is_err());
        assert!(Image::new(Array3::from_elem((0, 2, 1), 0.5)).is_err());
    }

    #[test]
    fn image_clamped_accepts_roundoff() {
        let img = Image::new_clamped(Array3::from_elem((2, 2, 1), 1.0 + 1e-12)).unwrap();
        assert!(img.pixels().iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn dataset_rejects_bad_labels_and_mixed_shapes() {
        let ex = |label| LabeledExample {
            image: gray(2, 2, 0.5),
            label,
        };
        assert!(Dataset::new(vec![ex(3)], 3, DistributionTag::benign()).is_err());
        assert!(Dataset::new(vec![], 3, DistributionTag::benign()).is_err());
        let mixed = vec![
            ex(0),
            LabeledExample {
                image: gray(3, 2, 0.5),
                label: 0,
            },
        ];
        assert!(Dataset::new(mixed, 3, DistributionTag::benign()).is_err());
    }

    #[test]
    fn prediction_label_is_argmax_with_lowest_tie_break() {
        let p = PredictionResult::from_probabilities(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(p.label(), 0);
        let p = PredictionResult::from_probabilities(vec![0.1, 0.5, 0.4]).unwrap();
        assert_eq!(p.label(), 1);
        assert!(PredictionResult::from_probabilities(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn subsample_identity_determinism_uniqueness() {
        let examples: Vec<LabeledExample> = (0..10)
            .map(|i| LabeledExample {
                image: gray(2, 2, i as f64 / 10.0),
                label: i % 3,
            })
            .collect();
        let d = Dataset::new(examples, 3, DistributionTag::benign()).unwrap();

        // n == |d|: same multiset.
        let all = d.subsample(10, 123).unwrap();
        let mut got: Vec<f64> = all.examples().iter().map(|e| e.image.pixels()[[0, 0, 0]]).collect();
        let mut want: Vec<f64> = d.examples().iter().map(|e| e.image.pixels()[[0, 0, 0]]).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        assert_eq!(got, want);

        // Fixed seed: identical subsets.
        let a = d.subsample(5, 7).unwrap();
        let b = d.subsample(5, 7).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());

        // Distinct indices (brute force over pixel ids).
        let big: Vec<LabeledExample> = (0..100)
            .map(|i| LabeledExample {
                image: gray(2, 2, i as f64 / 100.0),
                label: i % 10,
            })
            .collect();
        let d = Dataset::new(big, 10, DistributionTag::benign()).unwrap();
        let s = d.subsample(50, 1).unwrap();
        let mut ids: Vec<u64> = s
            .examples()
            .iter()
            .map(|e| (e.image.pixels()[[0, 0, 0]] * 100.0).round() as u64)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 50);

        assert!(d.subsample(101, 1).is_err());
        assert!(d.subsample(0, 1).is_err());
    }
}
