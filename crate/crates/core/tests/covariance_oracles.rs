use hierload::linalg::Matrix;
use hierload::reconciliation::{
    estimate_graphical_lasso, estimate_ledoit_wolf, graphical_lasso, sample_covariance, GlassoOptions,
};

fn close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() <= tol)
}

/// Per-sample form of the shrinkage intensity, written independently of
/// the estimator: β = Σ_k ‖x_k x_kᵀ − S‖²_F / (n² p), δ = ‖S − μI‖²_F / p.
fn lw_oracle(x: &Matrix<f64>) -> (f64, Matrix<f64>) {
    let (n, p) = x.shape();
    let means: Vec<f64> = (0..p).map(|j| x.col(j).iter().sum::<f64>() / n as f64).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..p).map(|j| x[(i, j)] - means[j]).collect()).collect();
    let mut s = vec![vec![0.0; p]; p];
    for r in &rows {
        for a in 0..p {
            for b in 0..p {
                s[a][b] += r[a] * r[b] / n as f64;
            }
        }
    }
    let mu = (0..p).map(|i| s[i][i]).sum::<f64>() / p as f64;
    let mut delta = 0.0;
    for a in 0..p {
        for b in 0..p {
            let t = if a == b { mu } else { 0.0 };
            delta += (s[a][b] - t).powi(2);
        }
    }
    delta /= p as f64;
    let mut beta = 0.0;
    for r in &rows {
        for a in 0..p {
            for b in 0..p {
                beta += (r[a] * r[b] - s[a][b]).powi(2);
            }
        }
    }
    beta /= (n * n * p) as f64;
    let shrink = beta.min(delta) / delta;
    let w = Matrix::from_fn(p, p, |a, b| (1.0 - shrink) * s[a][b] + if a == b { shrink * mu } else { 0.0 });
    (shrink, w)
}

#[test]
fn ledoit_wolf_hand_case_with_symmetric_samples() {
    // Zero-mean rows; S = diag(0.5, 2, 4.5) plus off-diagonals 0.5, 0.75, 1.5.
    let x = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0], [-1.0, -2.0, -3.0]]).unwrap();
    let est = estimate_ledoit_wolf(&x).unwrap();
    assert!((est.regularization - 0.75).abs() < 1e-12);
    let expect = Matrix::from_rows(&[[1.875, 0.125, 0.1875], [0.125, 2.25, 0.375], [0.1875, 0.375, 2.875]]).unwrap();
    assert!(close(&est.w, &expect, 1e-12));
    let (shrink, w) = lw_oracle(&x);
    assert!((est.regularization - shrink).abs() < 1e-12);
    assert!(close(&est.w, &w, 1e-12));
}

#[test]
fn ledoit_wolf_full_shrinkage_case() {
    let x = Matrix::from_rows(&[[1.0, 2.0, 0.0], [0.0, 1.0, 3.0], [2.0, 0.0, 1.0], [1.0, 1.0, 1.0], [3.0, 2.0, 2.0]]).unwrap();
    let est = estimate_ledoit_wolf(&x).unwrap();
    assert!((est.regularization - 1.0).abs() < 1e-12);
    assert!(close(&est.w, &Matrix::diagonal(&[0.88, 0.88, 0.88]), 1e-12));
    let (_, w) = lw_oracle(&x);
    assert!(close(&est.w, &w, 1e-12));
}

#[test]
fn ledoit_wolf_matches_oracle_on_pseudo_random_data() {
    let mut state = 7u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for n in [3usize, 8, 40] {
        let x = Matrix::from_fn(n, 3, |_, _| next());
        let est = estimate_ledoit_wolf(&x).unwrap();
        let (shrink, w) = lw_oracle(&x);
        assert!((est.regularization - shrink).abs() < 1e-12, "n = {n}");
        assert!(close(&est.w, &w, 1e-12), "n = {n}");
    }
}

#[test]
fn glasso_without_penalty_is_the_sample_covariance() {
    let x: Matrix<f64> = Matrix::from_rows(&[[1.0, 2.0, 0.5], [0.0, 1.0, 3.0], [2.0, 0.0, 1.0], [1.5, 1.0, 1.0], [3.0, 2.5, 2.0]]).unwrap();
    let s = sample_covariance(&x).unwrap();
    let est = estimate_graphical_lasso(&x, Some(0.0), &GlassoOptions::default()).unwrap();
    for (a, b) in est.w.as_slice().iter().zip(s.as_slice()) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12), "{a} vs {b}");
    }
}

#[test]
fn glasso_two_by_two_soft_threshold() {
    let s = Matrix::from_rows(&[[1.0, 0.5], [0.5, 2.0]]).unwrap();
    for (lambda, off) in [(0.2f64, 0.3f64), (0.5, 0.0), (0.8, 0.0)] {
        let (w, theta) = graphical_lasso(&s, lambda, &GlassoOptions::default()).unwrap();
        assert!((w[(0, 1)] - off).abs() < 1e-6, "λ = {lambda}: {}", w[(0, 1)]);
        assert!((w[(0, 0)] - 1.0).abs() < 1e-12 && (w[(1, 1)] - 2.0).abs() < 1e-12);
        // Θ is the inverse of W.
        let id = w.matmul(&theta);
        assert!(close(&id, &Matrix::identity(2), 1e-8));
    }
}
