use super::net::{Layer, Param};
use super::par::matmul;
use super::Tensor;
use crate::util::Rng;
use ndarray::{Array2, ArrayD, Axis, IxDyn};
use rand_distr::{Distribution, Normal};

/// 2-D convolution with square kernel, zero padding, and He-normal init.
/// Forward uses im2col + gemm; backward reuses the cached column matrix.
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    weight: Param, // (out, in*k*k)
    bias: Param,   // (out)
    cols: Option<Array2<f64>>,
    input_dim: (usize, usize, usize, usize),
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = (in_channels * kernel * kernel) as f64;
        let std = (2.0 / fan_in).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let weight = ArrayD::from_shape_fn(IxDyn(&[out_channels, in_channels * kernel * kernel]), |_| {
            normal.sample(rng)
        });
        let bias = ArrayD::zeros(IxDyn(&[out_channels]));
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            weight: Param::new(weight),
            bias: Param::new(bias),
            cols: None,
            input_dim: (0, 0, 0, 0),
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.pad - self.kernel) / self.stride + 1;
        let ow = (w + 2 * self.pad - self.kernel) / self.stride + 1;
        (oh, ow)
    }

    fn weight2(&self) -> Array2<f64> {
        self.weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("conv weight rank")
            .to_owned()
    }
}

fn im2col(x: &Tensor, kernel: usize, stride: usize, pad: usize) -> Array2<f64> {
    let (n, c, h, w) = x.dim();
    let oh = (h + 2 * pad - kernel) / stride + 1;
    let ow = (w + 2 * pad - kernel) / stride + 1;
    let row_len = c * kernel * kernel;
    let mut cols = Array2::<f64>::zeros((n * oh * ow, row_len));
    let chunks: Vec<_> = cols.axis_chunks_iter_mut(Axis(0), oh * ow).collect();
    rayon::scope(|s| {
        for (ni, mut chunk) in chunks.into_iter().enumerate() {
            let x = x.view();
            s.spawn(move |_| {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let row = oy * ow + ox;
                        let mut col = 0;
                        for ch in 0..c {
                            for ky in 0..kernel {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                for kx in 0..kernel {
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                                        chunk[[row, col]] = x[[ni, ch, iy as usize, ix as usize]];
                                    }
                                    col += 1;
                                }
                            }
                        }
                    }
                }
            });
        }
    });
    cols
}

fn col2im(
    cols: &Array2<f64>,
    dim: (usize, usize, usize, usize),
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Tensor {
    let (_n, c, h, w) = dim;
    let oh = (h + 2 * pad - kernel) / stride + 1;
    let ow = (w + 2 * pad - kernel) / stride + 1;
    let mut out = Tensor::zeros(dim);
    let chunks: Vec<_> = out.axis_chunks_iter_mut(Axis(0), 1).collect();
    rayon::scope(|s| {
        for (ni, mut img) in chunks.into_iter().enumerate() {
            let cols = cols.view();
            s.spawn(move |_| {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let row = ni * oh * ow + oy * ow + ox;
                        let mut col = 0;
                        for ch in 0..c {
                            for ky in 0..kernel {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                for kx in 0..kernel {
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                                        img[[0, ch, iy as usize, ix as usize]] += cols[[row, col]];
                                    }
                                    col += 1;
                                }
                            }
                        }
                    }
                }
            });
        }
    });
    out
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "conv input channels");
        let (oh, ow) = self.out_hw(h, w);
        let cols = im2col(x, self.kernel, self.stride, self.pad);
        // (N*OH*OW, row_len) x (row_len, out) -> (N*OH*OW, out)
        let w2 = self.weight2();
        let out_mat = matmul(cols.view(), w2.t());
        self.cols = Some(cols);
        self.input_dim = (n, c, h, w);

        let mut out = Tensor::zeros((n, self.out_channels, oh, ow));
        let bias = &self.bias.value;
        for ni in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ni * oh * ow + oy * ow + ox;
                    for co in 0..self.out_channels {
                        out[[ni, co, oy, ox]] = out_mat[[row, co]] + bias[co];
                    }
                }
            }
        }
        out
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, co, oh, ow) = grad_out.dim();
        assert_eq!(co, self.out_channels);
        let cols = self.cols.take().expect("backward without forward");

        let mut g_mat = Array2::<f64>::zeros((n * oh * ow, co));
        for ni in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ni * oh * ow + oy * ow + ox;
                    for c in 0..co {
                        g_mat[[row, c]] = grad_out[[ni, c, oy, ox]];
                    }
                }
            }
        }

        // grad_w (out, row_len) = g_mat^T . cols
        let grad_w = matmul(g_mat.t(), cols.view());
        self.weight.grad += &grad_w.into_dyn();
        let grad_b = g_mat.sum_axis(Axis(0));
        self.bias.grad += &grad_b.into_dyn();

        // grad_cols = g_mat . weight
        let w2 = self.weight2();
        let grad_cols = matmul(g_mat.view(), w2.view());
        col2im(&grad_cols, self.input_dim, self.kernel, self.stride, self.pad)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
}

