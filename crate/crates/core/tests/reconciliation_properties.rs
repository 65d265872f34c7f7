use hierload::hierarchy::Hierarchy;
use hierload::linalg::Matrix;
use hierload::reconciliation::{
    bayes_projection, mint_projection, ols_projection, reconcile_bayes, reconcile_mint, reconcile_ols,
};
use proptest::prelude::*;

fn hierarchy_strategy() -> impl Strategy<Value = Hierarchy> {
    prop_oneof![
        Just(Hierarchy::build(2, &[]).unwrap()),
        Just(Hierarchy::build(4, &[2]).unwrap()),
        Just(Hierarchy::build(6, &[3]).unwrap()),
        Just(Hierarchy::build(8, &[2, 4]).unwrap()),
        Just(Hierarchy::build(12, &[3, 6]).unwrap()),
    ]
}

/// SPD matrix `LLᵀ + 0.1·I` from unconstrained entries.
fn spd(n: usize, entries: &[f64]) -> Matrix<f64> {
    let l = Matrix::from_fn(n, n, |i, j| if j <= i { entries[(i * n + j) % entries.len()] } else { 0.0 });
    let mut w = l.matmul(&l.transpose());
    for i in 0..n {
        w[(i, i)] += 0.1;
    }
    w
}

fn max_incoherence(all: &Matrix<f64>, bottom: &Matrix<f64>, h: &Hierarchy) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..all.nrows() {
        let agg = h.aggregate_vec(bottom.row(r));
        for (a, b) in all.row(r).iter().zip(&agg) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_method_returns_coherent_forecasts(
        h in hierarchy_strategy(),
        vals in prop::collection::vec(-100.0f64..100.0, 64),
        w_entries in prop::collection::vec(-2.0f64..2.0, 1..50),
    ) {
        let n = h.n_series();
        let base = Matrix::from_fn(3, n, |i, j| vals[(i * n + j) % vals.len()]);
        let w = spd(n, &w_entries);
        for r in [
            reconcile_ols(&base, &h).unwrap(),
            reconcile_mint(&base, &h, &w).unwrap(),
            reconcile_bayes(&base, &h, &w, false).unwrap(),
            reconcile_bayes(&base, &h, &w, true).unwrap(),
        ] {
            prop_assert!(max_incoherence(&r.all, &r.bottom, &h) < 1e-9);
        }
    }

    #[test]
    fn mint_with_identity_is_ols(h in hierarchy_strategy(), vals in prop::collection::vec(-50.0f64..50.0, 32)) {
        let n = h.n_series();
        let base = Matrix::from_fn(2, n, |i, j| vals[(i * n + j) % vals.len()]);
        let a = reconcile_ols(&base, &h).unwrap();
        let b = reconcile_mint(&base, &h, &Matrix::identity(n)).unwrap();
        for (x, y) in a.all.as_slice().iter().zip(b.all.as_slice()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn projections_reproduce_coherent_inputs(h in hierarchy_strategy(), w_entries in prop::collection::vec(-2.0f64..2.0, 1..50)) {
        // P S = I: reconciling an already coherent vector leaves it unchanged.
        let n = h.n_series();
        let s: Matrix<f64> = h.summation_matrix();
        let w = spd(n, &w_entries);
        for p in [ols_projection(&h).unwrap(), mint_projection(&h, &w).unwrap(), bayes_projection(&h, &w, false).unwrap()] {
            let ps = p.p.matmul(&s);
            for i in 0..ps.nrows() {
                for j in 0..ps.ncols() {
                    let id = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((ps[(i, j)] - id).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn reconciliation_is_linear(h in hierarchy_strategy(), vals in prop::collection::vec(-50.0f64..50.0, 32), c in -3.0f64..3.0) {
        let n = h.n_series();
        let x = Matrix::from_fn(1, n, |_, j| vals[j % vals.len()]);
        let a = reconcile_ols(&x, &h).unwrap();
        let b = reconcile_ols(&x.scale(c), &h).unwrap();
        for (u, v) in a.all.as_slice().iter().zip(b.all.as_slice()) {
            prop_assert!((u * c - v).abs() < 1e-9 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn single_precision_reconciliation_is_coherent() {
    let h = Hierarchy::build(4, &[2]).unwrap();
    let base: Matrix<f32> = Matrix::from_rows(&[[10.0, 4.0, 5.0, 3.0, 2.0, 2.0, 1.0]]).unwrap();
    let r = reconcile_ols(&base, &h).unwrap();
    let agg = h.aggregate_vec(r.bottom.row(0));
    for (a, b) in r.all.row(0).iter().zip(&agg) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn worked_example_is_exact() {
    let h = Hierarchy::build(2, &[]).unwrap();
    let r = reconcile_ols(&Matrix::from_rows(&[[10.0, 3.0, 4.0]]).unwrap(), &h).unwrap();
    assert_eq!(r.all.row(0), &[9.0, 4.0, 5.0]);
}
