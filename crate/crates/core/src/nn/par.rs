use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};

/// `a (m,k) x b (k,n)`, row-chunked across the rayon pool. Each chunk is an
/// independent gemm into a disjoint output block, so results are identical
/// run to run.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let (k2, n) = b.dim();
    assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
    let mut out = Array2::zeros((m, n));
    let threads = rayon::current_num_threads().max(1);
    let chunk = m.div_ceil(threads).max(64);
    if m <= chunk {
        general_mat_mul(1.0, &a, &b, 0.0, &mut out.view_mut());
    } else {
        let a_chunks: Vec<ArrayView2<'_, f64>> = a.axis_chunks_iter(Axis(0), chunk).collect();
        let out_chunks: Vec<_> = out.axis_chunks_iter_mut(Axis(0), chunk).collect();
        rayon::scope(|s| {
            for (ai, mut oi) in a_chunks.into_iter().zip(out_chunks) {
                let b = b.reborrow();
                s.spawn(move |_| {
                    general_mat_mul(1.0, &ai, &b, 0.0, &mut oi);
                });
            }
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn matches_naive_product() {
        let m = 150;
        let k = 17;
        let n = 13;
        let a = Array2::from_shape_fn((m, k), |(i, j)| ((i * 31 + j * 7) % 11) as f64 - 5.0);
        let b = Array2::from_shape_fn((k, n), |(i, j)| ((i * 13 + j * 3) % 7) as f64 - 3.0);
        let got = matmul(a.view(), b.view());
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|t| a[[i, t]] * b[[t, j]]).sum();
                assert!((got[[i, j]] - want).abs() < 1e-9);
            }
        }
    }
}
