use super::Tensor;
use crate::util::Rng;
use ndarray::ArrayD;

/// A learnable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: ArrayD<f64>,
    pub grad: ArrayD<f64>,
}

impl Param {
    pub fn new(value: ArrayD<f64>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// One differentiable stage. `forward` caches whatever `backward` needs;
/// `backward` accumulates parameter gradients and returns the gradient with
/// respect to its input.
pub trait Layer: Send {
    fn forward(&mut self, x: &Tensor, train: bool, rng: &mut Rng) -> Tensor;
    fn backward(&mut self, grad_out: &Tensor) -> Tensor;
    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }
    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Layers applied in order.
pub struct Sequential {
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new(layers: Vec<Box<dyn Layer>>) -> Self {
        Sequential { layers }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool, rng: &mut Rng) -> Tensor {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, train, rng);
        }
        cur
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let mut cur = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            cur = layer.backward(&cur);
        }
        cur
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Parameter tensors in definition order, for checkpointing.
    pub fn export_params(&self) -> Vec<ArrayD<f64>> {
        self.params().into_iter().map(|p| p.value.clone()).collect()
    }

    pub fn import_params(&mut self, values: Vec<ArrayD<f64>>) -> crate::Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(crate::Error::validation(format!(
                "checkpoint has {} parameter tensors, network expects {}",
                values.len(),
                params.len()
            )));
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(crate::Error::shape(
                    format!("{:?}", p.value.shape()),
                    format!("{:?}", v.shape()),
                ));
            }
            p.value = v;
            p.grad = ArrayD::zeros(p.value.raw_dim());
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

impl Layer for Sequential {
    fn forward(&mut self, x: &Tensor, train: bool, rng: &mut Rng) -> Tensor {
        Sequential::forward(self, x, train, rng)
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        Sequential::backward(self, grad_out)
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }
}

/// `y = x + inner(x)`. Input and output shapes must match.
pub struct ResidualBlock {
    inner: Sequential,
}

impl ResidualBlock {
    pub fn new(inner: Sequential) -> Self {
        ResidualBlock { inner }
    }
}

impl Layer for ResidualBlock {
    fn forward(&mut self, x: &Tensor, train: bool, rng: &mut Rng) -> Tensor {
        let mut y = self.inner.forward(x, train, rng);
        y += x;
        y
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let mut g = self.inner.backward(grad_out);
        g += grad_out;
        g
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.inner.params_mut()
    }
    fn params(&self) -> Vec<&Param> {
        self.inner.params()
    }
}

/// `y = inner(x) + shortcut(x)` for blocks whose shape changes (strided
/// residual stages with a projection shortcut).
pub struct ProjectedResidualBlock {
    inner: Sequential,
    shortcut: Sequential,
}

impl ProjectedResidualBlock {
    pub fn new(inner: Sequential, shortcut: Sequential) -> Self {
        ProjectedResidualBlock { inner, shortcut }
    }
}

impl Layer for ProjectedResidualBlock {
    fn forward(&mut self, x: &Tensor, train: bool, rng: &mut Rng) -> Tensor {
        let mut y = self.inner.forward(x, train, rng);
        y += &self.shortcut.forward(x, train, rng);
        y
    }
    fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let mut g = self.inner.backward(grad_out);
        g += &self.shortcut.backward(grad_out);
        g
    }
    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.inner.params_mut();
        v.extend(self.shortcut.params_mut());
        v
    }
    fn params(&self) -> Vec<&Param> {
        let mut v = self.inner.params();
        v.extend(self.shortcut.params());
        v
    }
}
