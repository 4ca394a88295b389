use super::net::{Layer, Param};
use super::par::matmul;
use super::Tensor;
use crate::util::Rng;
use ndarray::{Array2, ArrayD, Axis, IxDyn};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

/// Fully connected layer. Flattens (N, C, H, W) to (N, C*H*W) internally and
/// emits (N, out, 1, 1) so it composes inside `Sequential`.
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    weight: Param, // (out, in)
    bias: Param,   // (out)
    input: Option<Array2<f64>>,
    input_dim: (usize, usize, usize, usize),
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, rng: &mut Rng) -> Self {
        let std = (2.0 / in_features as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let weight =
            ArrayD::from_shape_fn(IxDyn(&[out_features, in_features]), |_| normal.sample(rng));
        Dense {
            in_features,
            out_features,
            weight: Param::new(weight),
            bias: Param::new(ArrayD::zeros(IxDyn(&[out_features]))),
            input: None,
            input_dim: (0, 0, 0, 0),
        }
    }

    /// All-zero weights and bias: the layer outputs exactly zero until the
    /// first update. Used for classification heads so an untrained model
    /// predicts the uniform distribution.
    pub fn new_zeroed(in_features: usize, out_features: usize) -> Self {
        Dense {
            in_features,
            out_features,
            weight: Param::new(ArrayD::zeros(IxDyn(&[out_features, in_features]))),
            bias: Param::new(ArrayD::zeros(IxDyn(&[out_features]))),
            input: None,
            input_dim: (0, 0, 0, 0),
        }
    }

    fn weight2(&self) -> Array2<f64> {
        self.weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("dense weight rank")
            .to_owned()
    }
}

impl Layer for Dense {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        assert_eq!(c * h * w, self.in_features, "dense input features");
        let flat = x
            .view()
            .into_shape_with_order((n, self.in_features))
            .expect("contiguous input")
            .to_owned();
        let w2 = self.weight2();
        let out2 = matmul(flat.view(), w2.t());
        self.input = Some(flat);
        self.input_dim = (n, c, h, w);
        let mut out = Tensor::zeros((n, self.out_features, 1, 1));
        for i in 0..n {
            for j in 0..self.out_features {
                out[[i, j, 0, 0]] = out2[[i, j]] + self.bias.value[j];
            }
        }
        out
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, k, _, _) = grad_out.dim();
        let flat = self.input.take().expect("backward without forward");
        let mut g2 = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            for j in 0..k {
                g2[[i, j]] = grad_out[[i, j, 0, 0]];
            }
        }
        self.weight.grad += &matmul(g2.t(), flat.view()).into_dyn();
        self.bias.grad += &g2.sum_axis(Axis(0)).into_dyn();
        let w2 = self.weight2();
        let gx = matmul(g2.view(), w2.view());
        gx.into_shape_with_order(self.input_dim)
            .expect("reshape grad")
            .to_owned()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }
}

pub struct Relu {
    mask: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Relu { mask: None }
    }
}

impl Default for Relu {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let out = x * &mask;
        self.mask = Some(mask);
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        grad_out * self.mask.as_ref().expect("backward without forward")
    }
}

pub struct LeakyRelu {
    pub slope: f64,
    mask: Option<Tensor>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        LeakyRelu { slope, mask: None }
    }
}

impl Layer for LeakyRelu {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let slope = self.slope;
        let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { slope });
        let out = x * &mask;
        self.mask = Some(mask);
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        grad_out * self.mask.as_ref().expect("backward without forward")
    }
}

pub struct Tanh {
    output: Option<Tensor>,
}

impl Tanh {
    pub fn new() -> Self {
        Tanh { output: None }
    }
}

impl Default for Tanh {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for Tanh {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let out = x.mapv(f64::tanh);
        self.output = Some(out.clone());
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let y = self.output.as_ref().expect("backward without forward");
        grad_out * &y.mapv(|v| 1.0 - v * v)
    }
}

pub struct Sigmoid {
    output: Option<Tensor>,
}

impl Sigmoid {
    pub fn new() -> Self {
        Sigmoid { output: None }
    }
}

impl Default for Sigmoid {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for Sigmoid {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let out = x.mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.output = Some(out.clone());
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let y = self.output.as_ref().expect("backward without forward");
        grad_out * &y.mapv(|v| v * (1.0 - v))
    }
}

/// 2x2 max pooling with stride 2. Requires even spatial dims.
pub struct MaxPool2d {
    argmax: Option<Vec<(usize, usize)>>,
    input_dim: (usize, usize, usize, usize),
}

impl MaxPool2d {
    pub fn new() -> Self {
        MaxPool2d {
            argmax: None,
            input_dim: (0, 0, 0, 0),
        }
    }
}

impl Default for MaxPool2d {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for MaxPool2d {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        assert!(h % 2 == 0 && w % 2 == 0, "max pool needs even dims, got {h}x{w}");
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros((n, c, oh, ow));
        let mut argmax = vec![(0usize, 0usize); n * c * oh * ow];
        let mut idx = 0;
        for ni in 0..n {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_pos = (0, 0);
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let (iy, ix) = (oy * 2 + dy, ox * 2 + dx);
                                let v = x[[ni, ci, iy, ix]];
                                if v > best {
                                    best = v;
                                    best_pos = (iy, ix);
                                }
                            }
                        }
                        out[[ni, ci, oy, ox]] = best;
                        argmax[idx] = best_pos;
                        idx += 1;
                    }
                }
            }
        }
        self.argmax = Some(argmax);
        self.input_dim = (n, c, h, w);
        out
    }

    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, c, oh, ow) = grad_out.dim();
        let argmax = self.argmax.take().expect("backward without forward");
        let mut gx = Tensor::zeros(self.input_dim);
        let mut idx = 0;
        for ni in 0..n {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let (iy, ix) = argmax[idx];
                        gx[[ni, ci, iy, ix]] += grad_out[[ni, ci, oy, ox]];
                        idx += 1;
                    }
                }
            }
        }
        gx
    }
}

/// Mean over the spatial dims: (N, C, H, W) -> (N, C, 1, 1).
pub struct GlobalAvgPool {
    input_dim: (usize, usize, usize, usize),
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool {
            input_dim: (0, 0, 0, 0),
        }
    }
}

impl Default for GlobalAvgPool {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        self.input_dim = (n, c, h, w);
        let scale = 1.0 / (h * w) as f64;
        let mut out = Tensor::zeros((n, c, 1, 1));
        for ni in 0..n {
            for ci in 0..c {
                let mut sum = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        sum += x[[ni, ci, y, xx]];
                    }
                }
                out[[ni, ci, 0, 0]] = sum * scale;
            }
        }
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, c, h, w) = self.input_dim;
        let scale = 1.0 / (h * w) as f64;
        let mut gx = Tensor::zeros(self.input_dim);
        for ni in 0..n {
            for ci in 0..c {
                let g = grad_out[[ni, ci, 0, 0]] * scale;
                for y in 0..h {
                    for xx in 0..w {
                        gx[[ni, ci, y, xx]] = g;
                    }
                }
            }
        }
        gx
    }
}

/// Nearest-neighbour 2x upsampling. Backward is 2x2 sum pooling.
pub struct Upsample2x;

impl Upsample2x {
    pub fn new() -> Self {
        Upsample2x
    }
}

impl Default for Upsample2x {
    fn default() -> Self {
        Self::new()
    }
}

impl Layer for Upsample2x {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        let mut out = Tensor::zeros((n, c, h * 2, w * 2));
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        let v = x[[ni, ci, y, xx]];
                        out[[ni, ci, 2 * y, 2 * xx]] = v;
                        out[[ni, ci, 2 * y + 1, 2 * xx]] = v;
                        out[[ni, ci, 2 * y, 2 * xx + 1]] = v;
                        out[[ni, ci, 2 * y + 1, 2 * xx + 1]] = v;
                    }
                }
            }
        }
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, c, h2, w2) = grad_out.dim();
        let (h, w) = (h2 / 2, w2 / 2);
        let mut gx = Tensor::zeros((n, c, h, w));
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        gx[[ni, ci, y, xx]] = grad_out[[ni, ci, 2 * y, 2 * xx]]
                            + grad_out[[ni, ci, 2 * y + 1, 2 * xx]]
                            + grad_out[[ni, ci, 2 * y, 2 * xx + 1]]
                            + grad_out[[ni, ci, 2 * y + 1, 2 * xx + 1]];
                    }
                }
            }
        }
        gx
    }
}

/// Symmetric zero padding of the spatial dims.
pub struct Pad2d {
    pub pad: usize,
}

impl Pad2d {
    pub fn new(pad: usize) -> Self {
        Pad2d { pad }
    }
}

impl Layer for Pad2d {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        let p = self.pad;
        let mut out = Tensor::zeros((n, c, h + 2 * p, w + 2 * p));
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        out[[ni, ci, y + p, xx + p]] = x[[ni, ci, y, xx]];
                    }
                }
            }
        }
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, c, hp, wp) = grad_out.dim();
        let p = self.pad;
        let (h, w) = (hp - 2 * p, wp - 2 * p);
        let mut gx = Tensor::zeros((n, c, h, w));
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        gx[[ni, ci, y, xx]] = grad_out[[ni, ci, y + p, xx + p]];
                    }
                }
            }
        }
        gx
    }
}

/// Center crop that removes `crop` pixels from every spatial edge; the
/// inverse of [`Pad2d`].
pub struct Crop2d {
    pub crop: usize,
}

impl Crop2d {
    pub fn new(crop: usize) -> Self {
        Crop2d { crop }
    }
}

impl Layer for Crop2d {
    fn forward(&mut self, x: &Tensor, _train: bool, _rng: &mut Rng) -> Tensor {
        let (n, c, h, w) = x.dim();
        let p = self.crop;
        let mut out = Tensor::zeros((n, c, h - 2 * p, w - 2 * p));
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h - 2 * p {
                    for xx in 0..w - 2 * p {
                        out[[ni, ci, y, xx]] = x[[ni, ci, y + p, xx + p]];
                    }
                }
            }
        }
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (n, c, h, w) = grad_out.dim();
        let p = self.crop;
        let mut gx = Tensor::zeros((n, c, h + 2 * p, w + 2 * p));
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        gx[[ni, ci, y + p, xx + p]] = grad_out[[ni, ci, y, xx]];
                    }
                }
            }
        }
        gx
    }
}

/// Inverted dropout: active only in train mode, identity at inference.
pub struct Dropout {
    pub rate: f64,
    mask: Option<Tensor>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate));
        Dropout { rate, mask: None }
    }
}

impl Layer for Dropout {
    fn forward(&mut self, x: &Tensor, train: bool, rng: &mut Rng) -> Tensor {
        if !train || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask = Tensor::from_shape_fn(x.dim(), |_| {
            if rng.gen_range(0.0..1.0) < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let out = x * &mask;
        self.mask = Some(mask);
        out
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        match self.mask.as_ref() {
            Some(mask) => grad_out * mask,
            None => grad_out.clone(),
        }
    }
}
