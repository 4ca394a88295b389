use super::net::{Layer, Param};
use super::Tensor;
use crate::util::Rng;
use ndarray::{ArrayD, IxDyn};

const EPS: f64 = 1e-5;

/// Per-channel batch normalization over (N, H, W) with running statistics
/// for inference.
///
/// The running mean/variance are exposed as parameters with permanently zero
/// gradients: optimizers leave them untouched while checkpoints capture them.
pub struct BatchNorm2d {
    pub channels: usize,
    gamma: Param,
    beta: Param,
    running_mean: Param,
    running_var: Param,
    momentum: f64,
    // caches
    xhat: Option<Tensor>,
    inv_std: Vec<f64>,
    trained_forward: bool,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            channels,
            gamma: Param::new(ArrayD::from_elem(IxDyn(&[channels]), 1.0)),
            beta: Param::new(ArrayD::zeros(IxDyn(&[channels]))),
            running_mean: Param::new(ArrayD::zeros(IxDyn(&[channels]))),
            running_var: Param::new(ArrayD::from_elem(IxDyn(&[channels]), 1.0)),
            momentum: 0.1,
            xhat: None,
            inv_std: vec![0.0; channels],
            trained_forward: false,
        }
    }
}

impl Layer for BatchNorm2d {
    fn forward(&mut self, x: &Tensor, train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels);
        let count = (n * h * w) as f64;
        let mut out = Tensor::zeros((n, c, h, w));
        let mut xhat = Tensor::zeros((n, c, h, w));
        self.trained_forward = train;
        for ci in 0..c {
            let (mean, var) = if train {
                let mut sum = 0.0;
                for ni in 0..n {
                    for y in 0..h {
                        for xx in 0..w {
                            sum += x[[ni, ci, y, xx]];
                        }
                    }
                }
                let mean = sum / count;
                let mut var = 0.0;
                for ni in 0..n {
                    for y in 0..h {
                        for xx in 0..w {
                            let d = x[[ni, ci, y, xx]] - mean;
                            var += d * d;
                        }
                    }
                }
                var /= count;
                let m = self.momentum;
                self.running_mean.value[ci] = (1.0 - m) * self.running_mean.value[ci] + m * mean;
                self.running_var.value[ci] = (1.0 - m) * self.running_var.value[ci] + m * var;
                (mean, var)
            } else {
                (self.running_mean.value[ci], self.running_var.value[ci])
            };
            let inv_std = 1.0 / (var + EPS).sqrt();
            self.inv_std[ci] = inv_std;
            let g = self.gamma.value[ci];
            let b = self.beta.value[ci];
            for ni in 0..n {
                for y in 0..h {
                    for xx in 0..w {
                        let xh = (x[[ni, ci, y, xx]] - mean) * inv_std;
                        xhat[[ni, ci, y, xx]] = xh;
                        out[[ni, ci, y, xx]] = g * xh + b;
                    }
                }
            }
        }
        self.xhat = Some(xhat);
        out
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, c, h, w) = grad_out.dim();
        let xhat = self.xhat.take().expect("backward without forward");
        let count = (n * h * w) as f64;
        let mut gx = Tensor::zeros((n, c, h, w));
        for ci in 0..c {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for ni in 0..n {
                for y in 0..h {
                    for xx in 0..w {
                        let g = grad_out[[ni, ci, y, xx]];
                        sum_g += g;
                        sum_gx += g * xhat[[ni, ci, y, xx]];
                    }
                }
            }
            self.beta.grad[ci] += sum_g;
            self.gamma.grad[ci] += sum_gx;
            let gamma = self.gamma.value[ci];
            let inv_std = self.inv_std[ci];
            if self.trained_forward {
                let mean_g = sum_g / count;
                let mean_gx = sum_gx / count;
                for ni in 0..n {
                    for y in 0..h {
                        for xx in 0..w {
                            let g = grad_out[[ni, ci, y, xx]];
                            let xh = xhat[[ni, ci, y, xx]];
                            gx[[ni, ci, y, xx]] = gamma * inv_std * (g - mean_g - xh * mean_gx);
                        }
                    }
                }
            } else {
                // Inference-mode statistics are constants.
                for ni in 0..n {
                    for y in 0..h {
                        for xx in 0..w {
                            gx[[ni, ci, y, xx]] = gamma * inv_std * grad_out[[ni, ci, y, xx]];
                        }
                    }
                }
            }
        }
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.gamma,
            &mut self.beta,
            &mut self.running_mean,
            &mut self.running_var,
        ]
    }
    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta, &self.running_mean, &self.running_var]
    }
}

/// Per-sample, per-channel normalization over (H, W) with a per-channel
/// affine transform. Identical behaviour in train and eval mode.
pub struct InstanceNorm2d {
    pub channels: usize,
    gamma: Param,
    beta: Param,
    xhat: Option<Tensor>,
    inv_std: Vec<f64>, // per (n, c), row-major
}

impl InstanceNorm2d {
    pub fn new(channels: usize) -> Self {
        InstanceNorm2d {
            channels,
            gamma: Param::new(ArrayD::from_elem(IxDyn(&[channels]), 1.0)),
            beta: Param::new(ArrayD::zeros(IxDyn(&[channels]))),
            xhat: None,
            inv_std: Vec::new(),
        }
    }
}

impl Layer for InstanceNorm2d {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels);
        let count = (h * w) as f64;
        let mut out = Tensor::zeros((n, c, h, w));
        let mut xhat = Tensor::zeros((n, c, h, w));
        self.inv_std = vec![0.0; n * c];
        for ni in 0..n {
            for ci in 0..c {
                let mut sum = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        sum += x[[ni, ci, y, xx]];
                    }
                }
                let mean = sum / count;
                let mut var = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        let d = x[[ni, ci, y, xx]] - mean;
                        var += d * d;
                    }
                }
                var /= count;
                let inv_std = 1.0 / (var + EPS).sqrt();
                self.inv_std[ni * c + ci] = inv_std;
                let g = self.gamma.value[ci];
                let b = self.beta.value[ci];
                for y in 0..h {
                    for xx in 0..w {
                        let xh = (x[[ni, ci, y, xx]] - mean) * inv_std;
                        xhat[[ni, ci, y, xx]] = xh;
                        out[[ni, ci, y, xx]] = g * xh + b;
                    }
                }
            }
        }
        self.xhat = Some(xhat);
        out
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, c, h, w) = grad_out.dim();
        let xhat = self.xhat.take().expect("backward without forward");
        let count = (h * w) as f64;
        let mut gx = Tensor::zeros((n, c, h, w));
        for ni in 0..n {
            for ci in 0..c {
                let mut sum_g = 0.0;
                let mut sum_gx = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        let g = grad_out[[ni, ci, y, xx]];
                        sum_g += g;
                        sum_gx += g * xhat[[ni, ci, y, xx]];
                    }
                }
                self.beta.grad[ci] += sum_g;
                self.gamma.grad[ci] += sum_gx;
                let gamma = self.gamma.value[ci];
                let inv_std = self.inv_std[ni * c + ci];
                let mean_g = sum_g / count;
                let mean_gx = sum_gx / count;
                for y in 0..h {
                    for xx in 0..w {
                        let g = grad_out[[ni, ci, y, xx]];
                        let xh = xhat[[ni, ci, y, xx]];
                        gx[[ni, ci, y, xx]] = gamma * inv_std * (g - mean_g - xh * mean_gx);
                    }
                }
            }
        }
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
}
