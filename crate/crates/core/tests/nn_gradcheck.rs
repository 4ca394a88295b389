//! Finite-difference checks of every layer's backward pass. The loss is a
//! fixed random weighted sum of the network output, so grad_out is constant
//! and the only thing under test is the layer's own chain rule.

use ndarray::{ArrayD, IxDyn};
use oodmap::nn::{
    BatchNorm2d, Conv2d, Crop2d, Dense, Dropout, GlobalAvgPool, InstanceNorm2d, Layer, LeakyRelu,
    MaxPool2d, Pad2d, ProjectedResidualBlock, Relu, ResidualBlock, Sequential, Sigmoid, Tanh,
    Tensor, Upsample2x,
};
use oodmap::util::{rng, Rng};
use rand::Rng as _;

/// Inputs bounded away from zero so ReLU kinks and pooling ties cannot sit
/// inside the finite-difference stencil.
fn random_input(dim: (usize, usize, usize, usize), r: &mut Rng) -> Tensor {
    Tensor::from_shape_fn(dim, |_| {
        let v: f64 = r.gen_range(0.15..1.0);
        if r.gen_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

fn weighted_loss(y: &Tensor, w: &Tensor) -> f64 {
    (y * w).sum()
}

fn forward_loss(net: &mut Sequential, x: &Tensor, w: &Tensor, train: bool, seed: u64) -> f64 {
    let mut r = rng(seed);
    let y = net.forward(x, train, &mut r);
    weighted_loss(&y, w)
}

/// Check analytic parameter and input gradients against central differences.
fn gradcheck(net: Sequential, dim: (usize, usize, usize, usize), train: bool, in_seed: u64) {
    gradcheck_skipping(net, dim, train, in_seed, &[]);
}

/// `skip` lists parameter indices that are state rather than learnables
/// (BatchNorm running statistics in eval mode): they influence the output
/// but carry no gradient by definition.
fn gradcheck_skipping(
    mut net: Sequential,
    dim: (usize, usize, usize, usize),
    train: bool,
    in_seed: u64,
    skip: &[usize],
) {
    let mut r = rng(in_seed);
    let x = random_input(dim, &mut r);

    // forward once to learn the output shape
    let mut r_fwd = rng(42);
    let y = net.forward(&x, train, &mut r_fwd);
    let w = Tensor::from_shape_fn(y.dim(), |_| r.gen_range(-1.0..1.0));

    // analytic gradients
    net.zero_grad();
    let mut r_fwd = rng(42);
    let _ = net.forward(&x, train, &mut r_fwd);
    let gx = net.backward(&w);
    let analytic: Vec<ArrayD<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();

    let h = 1e-5;
    let tol = |a: f64, n: f64| (a - n).abs() <= 1e-6 + 1e-5 * a.abs().max(n.abs());

    // parameter gradients
    let n_params = net.params().len();
    for pi in 0..n_params {
        if skip.contains(&pi) {
            continue;
        }
        let len = net.params()[pi].value.len();
        for ei in 0..len {
            let orig = net.params_mut()[pi].value.as_slice_mut().unwrap()[ei];
            net.params_mut()[pi].value.as_slice_mut().unwrap()[ei] = orig + h;
            let lp = forward_loss(&mut net, &x, &w, train, 42);
            net.params_mut()[pi].value.as_slice_mut().unwrap()[ei] = orig - h;
            let lm = forward_loss(&mut net, &x, &w, train, 42);
            net.params_mut()[pi].value.as_slice_mut().unwrap()[ei] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic[pi].as_slice().unwrap()[ei];
            assert!(
                tol(a, numeric),
                "param {pi} elem {ei}: analytic {a} vs numeric {numeric}"
            );
        }
    }

    // input gradients (sampled)
    let mut x2 = x.clone();
    let total = x2.len();
    let stride = (total / 23).max(1);
    for ei in (0..total).step_by(stride) {
        let orig = x2.as_slice_mut().unwrap()[ei];
        x2.as_slice_mut().unwrap()[ei] = orig + h;
        let lp = forward_loss(&mut net, &x2, &w, train, 42);
        x2.as_slice_mut().unwrap()[ei] = orig - h;
        let lm = forward_loss(&mut net, &x2, &w, train, 42);
        x2.as_slice_mut().unwrap()[ei] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let a = gx.as_slice().unwrap()[ei];
        assert!(
            tol(a, numeric),
            "input elem {ei}: analytic {a} vs numeric {numeric}"
        );
    }
}

fn seq(layers: Vec<Box<dyn Layer>>) -> Sequential {
    Sequential::new(layers)
}

#[test]
fn conv_stride1_pad1() {
    let mut r = rng(1);
    gradcheck(
        seq(vec![Box::new(Conv2d::new(2, 3, 3, 1, 1, &mut r))]),
        (2, 2, 5, 5),
        false,
        11,
    );
}

#[test]
fn conv_stride2_pad0() {
    let mut r = rng(2);
    gradcheck(
        seq(vec![Box::new(Conv2d::new(3, 2, 3, 2, 0, &mut r))]),
        (1, 3, 7, 7),
        false,
        12,
    );
}

#[test]
fn conv_kernel7_pad3() {
    let mut r = rng(3);
    gradcheck(
        seq(vec![Box::new(Conv2d::new(1, 2, 7, 1, 3, &mut r))]),
        (1, 1, 8, 8),
        false,
        13,
    );
}

#[test]
fn dense_layer() {
    let mut r = rng(4);
    gradcheck(
        seq(vec![Box::new(Dense::new(2 * 3 * 3, 5, &mut r))]),
        (2, 2, 3, 3),
        false,
        14,
    );
}

#[test]
fn activations() {
    for (i, layer) in [
        Box::new(Relu::new()) as Box<dyn Layer>,
        Box::new(LeakyRelu::new(0.2)),
        Box::new(Tanh::new()),
        Box::new(Sigmoid::new()),
    ]
    .into_iter()
    .enumerate()
    {
        gradcheck(seq(vec![layer]), (2, 2, 3, 3), false, 20 + i as u64);
    }
}

#[test]
fn pooling_and_resampling() {
    gradcheck(seq(vec![Box::new(MaxPool2d::new())]), (2, 2, 4, 4), false, 30);
    gradcheck(seq(vec![Box::new(GlobalAvgPool::new())]), (2, 3, 4, 4), false, 31);
    gradcheck(seq(vec![Box::new(Upsample2x::new())]), (1, 2, 3, 3), false, 32);
    gradcheck(seq(vec![Box::new(Pad2d::new(2))]), (1, 2, 3, 3), false, 33);
    gradcheck(seq(vec![Box::new(Crop2d::new(1))]), (1, 2, 5, 5), false, 34);
}

#[test]
fn norms_train_mode() {
    gradcheck(seq(vec![Box::new(BatchNorm2d::new(3))]), (3, 3, 4, 4), true, 40);
    gradcheck(seq(vec![Box::new(InstanceNorm2d::new(2))]), (2, 2, 4, 4), true, 41);
}

#[test]
fn batchnorm_eval_mode_uses_running_stats() {
    // Prime the running statistics with a few train forwards, then check the
    // eval-mode backward, which treats them as constants.
    let mut net = seq(vec![Box::new(BatchNorm2d::new(2))]);
    let mut r = rng(50);
    for _ in 0..5 {
        let x = random_input((4, 2, 3, 3), &mut r);
        let mut rf = rng(0);
        let _ = net.forward(&x, true, &mut rf);
    }
    gradcheck_skipping(net, (2, 2, 3, 3), false, 51, &[2, 3]);
}

#[test]
fn dropout_train_mode_with_fixed_seed() {
    gradcheck(seq(vec![Box::new(Dropout::new(0.4))]), (2, 2, 4, 4), true, 60);
}

#[test]
fn residual_blocks() {
    let mut r = rng(70);
    let inner = seq(vec![
        Box::new(Conv2d::new(2, 2, 3, 1, 1, &mut r)),
        Box::new(InstanceNorm2d::new(2)),
        Box::new(LeakyRelu::new(0.2)),
        Box::new(Conv2d::new(2, 2, 3, 1, 1, &mut r)),
    ]);
    gradcheck(
        seq(vec![Box::new(ResidualBlock::new(inner))]),
        (2, 2, 4, 4),
        true,
        71,
    );

    let inner = seq(vec![
        Box::new(Conv2d::new(2, 4, 3, 2, 1, &mut r)),
        Box::new(LeakyRelu::new(0.2)),
        Box::new(Conv2d::new(4, 4, 3, 1, 1, &mut r)),
    ]);
    let shortcut = seq(vec![Box::new(Conv2d::new(2, 4, 1, 2, 0, &mut r))]);
    gradcheck(
        seq(vec![Box::new(ProjectedResidualBlock::new(inner, shortcut))]),
        (2, 2, 4, 4),
        false,
        72,
    );
}

#[test]
fn composite_network() {
    // A miniature of the real classifier topology.
    let mut r = rng(80);
    let net = seq(vec![
        Box::new(Conv2d::new(1, 3, 3, 1, 1, &mut r)),
        Box::new(BatchNorm2d::new(3)),
        Box::new(Relu::new()),
        Box::new(MaxPool2d::new()),
        Box::new(Conv2d::new(3, 4, 3, 1, 1, &mut r)),
        Box::new(Relu::new()),
        Box::new(GlobalAvgPool::new()),
        Box::new(Dense::new(4, 3, &mut r)),
    ]);
    gradcheck(net, (2, 1, 6, 6), true, 81);
}

#[test]
fn params_roundtrip_preserves_forward() {
    let mut r = rng(90);
    let mut net = seq(vec![
        Box::new(Conv2d::new(1, 3, 3, 1, 1, &mut r)),
        Box::new(BatchNorm2d::new(3)),
        Box::new(Relu::new()),
        Box::new(Dense::new(3 * 4 * 4, 2, &mut r)),
    ]);
    let x = random_input((1, 1, 4, 4), &mut r);
    // touch running stats so they are non-trivial
    let mut rf = rng(0);
    let _ = net.forward(&x, true, &mut rf);
    let mut rf = rng(0);
    let y1 = net.forward(&x, false, &mut rf);

    let exported = net.export_params();
    let mut net2 = seq(vec![
        Box::new(Conv2d::new(1, 3, 3, 1, 1, &mut rng(999))),
        Box::new(BatchNorm2d::new(3)),
        Box::new(Relu::new()),
        Box::new(Dense::new(3 * 4 * 4, 2, &mut rng(998))),
    ]);
    net2.import_params(exported).unwrap();
    let mut rf = rng(0);
    let y2 = net2.forward(&x, false, &mut rf);
    assert_eq!(y1, y2);

    // shape mismatch is rejected
    let bad = vec![ArrayD::zeros(IxDyn(&[1]))];
    assert!(net2.import_params(bad).is_err());
}
