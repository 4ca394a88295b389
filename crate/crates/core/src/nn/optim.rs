use super::net::Param;

/// Learning-rate schedules, evaluated per optimizer step from the step index
/// and the planned total number of steps.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the base rate to zero over the planned steps.
    Cosine,
    /// Constant for the first half of the planned steps, then linear decay
    /// to zero over the second half.
    LinearAfterHalf,
}

impl LrSchedule {
    fn factor(&self, step: usize, total_steps: usize) -> f64 {
        let total = total_steps.max(1) as f64;
        let t = (step as f64).min(total);
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * t / total).cos()),
            LrSchedule::LinearAfterHalf => {
                let half = total / 2.0;
                if t <= half {
                    1.0
                } else {
                    ((total - t) / (total - half)).max(0.0)
                }
            }
        }
    }
}

pub trait Optimizer {
    /// Apply one update from the accumulated gradients, then advance the
    /// internal step counter. Gradients are not cleared.
    fn step(&mut self, params: &mut [&mut Param]);
    fn current_lr(&self) -> f64;
}

/// Stochastic gradient descent with classical momentum.
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub schedule: LrSchedule,
    pub total_steps: usize,
    step: usize,
    velocity: Vec<ndarray::ArrayD<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, schedule: LrSchedule, total_steps: usize) -> Self {
        Sgd {
            lr,
            momentum,
            schedule,
            total_steps,
            step: 0,
            velocity: Vec::new(),
        }
    }
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut [&mut Param]) {
        if self.velocity.is_empty() {
            self.velocity = params
                .iter()
                .map(|p| ndarray::ArrayD::zeros(p.value.raw_dim()))
                .collect();
        }
        let lr = self.current_lr();
        for (p, v) in params.iter_mut().zip(self.velocity.iter_mut()) {
            v.zip_mut_with(&p.grad, |vi, &gi| *vi = *vi * self.momentum + gi);
            p.value.zip_mut_with(v, |w, &vi| *w -= lr * vi);
        }
        self.step += 1;
    }

    fn current_lr(&self) -> f64 {
        self.lr * self.schedule.factor(self.step, self.total_steps)
    }
}

/// Adam with configurable beta1 (GAN training conventionally uses 0.5).
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
    pub total_steps: usize,
    step: usize,
    m: Vec<ndarray::ArrayD<f64>>,
    v: Vec<ndarray::ArrayD<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, schedule: LrSchedule, total_steps: usize) -> Self {
        Adam {
            lr,
            beta1,
            beta2: 0.999,
            eps: 1e-8,
            schedule,
            total_steps,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut [&mut Param]) {
        if self.m.is_empty() {
            self.m = params
                .iter()
                .map(|p| ndarray::ArrayD::zeros(p.value.raw_dim()))
                .collect();
            self.v = self.m.clone();
        }
        let lr = self.current_lr();
        let t = (self.step + 1) as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            m.zip_mut_with(&p.grad, |mi, &gi| {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi
            });
            v.zip_mut_with(&p.grad, |vi, &gi| {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi
            });
            ndarray::Zip::from(&mut p.value)
                .and(&*m)
                .and(&*v)
                .for_each(|w, &mi, &vi| {
                    let mhat = mi / bc1;
                    let vhat = vi / bc2;
                    *w -= lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
        self.step += 1;
    }

    fn current_lr(&self) -> f64 {
        self.lr * self.schedule.factor(self.step, self.total_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    fn quad_param(x0: f64) -> Param {
        Param::new(ArrayD::from_elem(IxDyn(&[1]), x0))
    }

    /// Minimize f(x) = (x - 3)^2 and check both optimizers reach the optimum.
    #[test]
    fn optimizers_minimize_quadratic() {
        for make in [
            |steps| Box::new(Sgd::new(0.1, 0.9, LrSchedule::Constant, steps)) as Box<dyn Optimizer>,
            |steps| Box::new(Adam::new(0.3, 0.9, LrSchedule::Constant, steps)) as Box<dyn Optimizer>,
        ] {
            let mut p = quad_param(-4.0);
            let mut opt = make(300);
            for _ in 0..300 {
                let x = p.value[[0]];
                p.grad[[0]] = 2.0 * (x - 3.0);
                opt.step(&mut [&mut p]);
                p.zero_grad();
            }
            assert!((p.value[[0]] - 3.0).abs() < 1e-3, "got {}", p.value[[0]]);
        }
    }

    #[test]
    fn schedules_reach_zero() {
        assert!(LrSchedule::Cosine.factor(100, 100) < 1e-9);
        assert_eq!(LrSchedule::LinearAfterHalf.factor(100, 100), 0.0);
        assert_eq!(LrSchedule::LinearAfterHalf.factor(40, 100), 1.0);
        let mid = LrSchedule::LinearAfterHalf.factor(75, 100);
        assert!((mid - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_value_unchanged() {
        // Running statistics ride through optimizers as zero-grad params.
        let mut p = quad_param(1.25);
        let mut sgd = Sgd::new(0.5, 0.9, LrSchedule::Constant, 10);
        let mut adam = Adam::new(0.5, 0.9, LrSchedule::Constant, 10);
        for _ in 0..5 {
            sgd.step(&mut [&mut p]);
            adam.step(&mut [&mut p]);
        }
        assert_eq!(p.value[[0]], 1.25);
    }
}
