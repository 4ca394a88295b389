//! A small CPU neural-network stack: batched 4-D tensors, layers with manual
//! backward passes, losses, and optimizers. Deterministic for a fixed seed;
//! heavy matrix products are row-chunked across threads in a way that does
//! not change results.

mod basic;
mod conv;
mod loss;
mod net;
mod norm;
mod optim;
mod par;

pub use basic::{Crop2d, Dense, Dropout, GlobalAvgPool, LeakyRelu, MaxPool2d, Pad2d, Relu, Sigmoid, Tanh, Upsample2x};
pub use conv::Conv2d;
pub use loss::{bce_with_logits, l1_loss, log_d_real_fake, mse_loss, softmax, softmax_cross_entropy};
pub use net::{Layer, Param, ProjectedResidualBlock, ResidualBlock, Sequential};
pub use norm::{BatchNorm2d, InstanceNorm2d};
pub use optim::{Adam, LrSchedule, Optimizer, Sgd};
pub use par::matmul;

/// Batched activations: (N, C, H, W).
pub type Tensor = ndarray::Array4<f64>;

/// Convert a batch of dataset images (H, W, C each) into an NCHW tensor.
pub fn batch_from_images(images: &[&crate::datamodel::Image]) -> Tensor {
    assert!(!images.is_empty());
    let (h, w, c) = images[0].shape();
    let mut out = Tensor::zeros((images.len(), c, h, w));
    for (n, img) in images.iter().enumerate() {
        for ((y, x, ch), &v) in img.pixels().indexed_iter() {
            out[[n, ch, y, x]] = v;
        }
    }
    out
}

/// Inverse of [`batch_from_images`] for a single batch element.
pub fn image_from_batch(t: &Tensor, n: usize) -> crate::Result<crate::datamodel::Image> {
    let (_, c, h, w) = t.dim();
    let mut img = ndarray::Array3::<f64>::zeros((h, w, c));
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                img[[y, x, ch]] = t[[n, ch, y, x]];
            }
        }
    }
    crate::datamodel::Image::new_clamped(img)
}

/// Logits view of a (N, K, 1, 1) network output.
pub fn squeeze_logits(t: &Tensor) -> ndarray::Array2<f64> {
    let (n, k, h, w) = t.dim();
    assert_eq!((h, w), (1, 1), "logits tensor must be (N,K,1,1)");
    let mut out = ndarray::Array2::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            out[[i, j]] = t[[i, j, 0, 0]];
        }
    }
    out
}

/// Lift a (N, K) gradient back to the (N, K, 1, 1) tensor shape.
pub fn unsqueeze_logits(g: &ndarray::Array2<f64>) -> Tensor {
    let (n, k) = g.dim();
    let mut out = Tensor::zeros((n, k, 1, 1));
    for i in 0..n {
        for j in 0..k {
            out[[i, j, 0, 0]] = g[[i, j]];
        }
    }
    out
}
