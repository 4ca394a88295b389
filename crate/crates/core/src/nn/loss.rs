use super::Tensor;
use ndarray::Array2;

/// Row-wise softmax of a logits matrix, numerically stabilized.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let (n, k) = logits.dim();
    let mut out = Array2::zeros((n, k));
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..k {
            let e = (row[j] - max).exp();
            out[[i, j]] = e;
            sum += e;
        }
        for j in 0..k {
            out[[i, j]] /= sum;
        }
    }
    out
}

/// Mean cross-entropy over the batch plus its gradient with respect to the
/// logits: `(softmax - onehot) / N`.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let (n, _k) = logits.dim();
    assert_eq!(n, labels.len());
    let probs = softmax(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    let scale = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs[[i, y]].max(1e-300).ln();
        grad[[i, y]] -= 1.0;
    }
    grad.mapv_inplace(|v| v * scale);
    (loss * scale, grad)
}

/// Mean sigmoid cross-entropy of a logits tensor against a constant target
/// (1.0 = real, 0.0 = fake). Returns the loss and its gradient w.r.t. the
/// logits.
pub fn bce_with_logits(logits: &Tensor, target: f64) -> (f64, Tensor) {
    let count = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits.mapv(|z| {
        let s = 1.0 / (1.0 + (-z).exp());
        // log(1+e^{-|z|}) formulation avoids overflow for large |z|
        let softplus = if z >= 0.0 {
            (1.0 + (-z).exp()).ln()
        } else {
            -z + (1.0 + z.exp()).ln()
        };
        // softplus(-z) is the t=1 loss; softplus(z) = softplus(-z) + z the t=0 loss
        loss += if target >= 0.5 { softplus } else { softplus + z };
        (s - target) / count
    });
    (loss / count, grad)
}

/// Mean squared error of a logits tensor against a constant target, the
/// least-squares GAN criterion. Returns loss and gradient w.r.t. logits.
pub fn mse_loss(logits: &Tensor, target: f64) -> (f64, Tensor) {
    let count = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits.mapv(|z| {
        let d = z - target;
        loss += d * d;
        2.0 * d / count
    });
    (loss / count, grad)
}

/// Mean absolute error between two tensors; gradient is with respect to `a`.
pub fn l1_loss(a: &Tensor, b: &Tensor) -> (f64, Tensor) {
    assert_eq!(a.dim(), b.dim());
    let count = a.len() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(a.dim());
    ndarray::Zip::from(&mut grad).and(a).and(b).for_each(|g, &x, &y| {
        let d = x - y;
        loss += d.abs();
        *g = d.signum() / count;
    });
    (loss / count, grad)
}

/// The log-form adversarial value `E[log D(real)] + E[log(1 - D(fake))]`
/// computed from discriminator logits; probabilities are clamped away from 0
/// so the value stays finite. Bookkeeping only, not differentiated.
pub fn log_d_real_fake(real_logits: &Tensor, fake_logits: &Tensor) -> f64 {
    let clamp = 1e-12;
    let mean_log_real = real_logits
        .iter()
        .map(|&z| (1.0 / (1.0 + (-z).exp())).max(clamp).ln())
        .sum::<f64>()
        / real_logits.len() as f64;
    let mean_log_one_minus_fake = fake_logits
        .iter()
        .map(|&z| (1.0 - 1.0 / (1.0 + (-z).exp())).max(clamp).ln())
        .sum::<f64>()
        / fake_logits.len() as f64;
    mean_log_real + mean_log_one_minus_fake
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0]).unwrap();
        let p = softmax(&logits);
        for i in 0..2 {
            assert_abs_diff_eq!(p.row(i).sum(), 1.0, epsilon = 1e-12);
        }
        assert!(p[[0, 2]] > p[[0, 1]] && p[[0, 1]] > p[[0, 0]]);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_difference() {
        let mut logits =
            Array2::from_shape_vec((2, 3), vec![0.3, -0.2, 0.5, 1.0, 0.0, -1.0]).unwrap();
        let labels = [2usize, 0];
        let (_, grad) = softmax_cross_entropy(&logits, &labels);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let orig = logits[[i, j]];
                logits[[i, j]] = orig + h;
                let (lp, _) = softmax_cross_entropy(&logits, &labels);
                logits[[i, j]] = orig - h;
                let (lm, _) = softmax_cross_entropy(&logits, &labels);
                logits[[i, j]] = orig;
                let num = (lp - lm) / (2.0 * h);
                assert_abs_diff_eq!(grad[[i, j]], num, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn bce_and_mse_gradients_match_finite_difference() {
        let mut t = Tensor::zeros((1, 1, 2, 2));
        t[[0, 0, 0, 0]] = 0.7;
        t[[0, 0, 0, 1]] = -1.3;
        t[[0, 0, 1, 0]] = 2.1;
        t[[0, 0, 1, 1]] = 0.0;
        let h = 1e-6;
        for target in [0.0, 1.0] {
            let (_, g) = bce_with_logits(&t, target);
            let (_, gm) = mse_loss(&t, target);
            for idx in [[0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 0, 1, 1]] {
                let orig = t[idx];
                t[idx] = orig + h;
                let (lp, _) = bce_with_logits(&t, target);
                let (lpm, _) = mse_loss(&t, target);
                t[idx] = orig - h;
                let (lm, _) = bce_with_logits(&t, target);
                let (lmm, _) = mse_loss(&t, target);
                t[idx] = orig;
                assert_abs_diff_eq!(g[idx], (lp - lm) / (2.0 * h), epsilon = 1e-7);
                assert_abs_diff_eq!(gm[idx], (lpm - lmm) / (2.0 * h), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn l1_loss_zero_iff_equal() {
        let a = Tensor::from_elem((1, 1, 2, 2), 0.4);
        let (loss, _) = l1_loss(&a, &a);
        assert_eq!(loss, 0.0);
        let b = Tensor::from_elem((1, 1, 2, 2), 0.9);
        let (loss, grad) = l1_loss(&a, &b);
        assert_abs_diff_eq!(loss, 0.5, epsilon = 1e-12);
        assert!(grad.iter().all(|&g| g < 0.0));
    }
}
