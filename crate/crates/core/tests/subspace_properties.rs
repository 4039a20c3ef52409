use l1pcanet::dataio::rng;
use l1pcanet::subspace::oracle::{l1pca_oracle, power_iteration_components};
use l1pcanet::subspace::{
    deflate_columns, l1_2dpca_components, l1_objective, l1pca_components, l1pca_first_component, l2_2dpca_components,
    l2pca_components, scatter_matrix, DataColumns, RowDataSet, SolverOptions,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn columns(dim: usize, n: usize) -> impl Strategy<Value = DataColumns> {
    prop::collection::vec(-10.0f64..10.0, dim * n).prop_map(move |d| DataColumns::new(dim, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_trace_is_nondecreasing(x in (1usize..6, 2usize..30).prop_flat_map(|(d, n)| columns(d, n))) {
        prop_assume!(x.as_slice().iter().any(|v| v.abs() > 1e-3));
        let pd = l1pca_first_component(&x, &SolverOptions::default()).unwrap();
        prop_assert!(pd.converged);
        for w in pd.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
        prop_assert!((dot(&pd.w, &pd.w) - 1.0).abs() < 1e-12);
        prop_assert!((l1_objective(&pd.w, &x).unwrap() - pd.objective).abs() <= 1e-9 * pd.objective.max(1.0));
    }

    #[test]
    fn l1_never_beats_the_oracle(x in (1usize..4, 1usize..10).prop_flat_map(|(d, n)| columns(d, n))) {
        prop_assume!(x.as_slice().iter().any(|v| v.abs() > 1e-3));
        let pd = l1pca_first_component(&x, &SolverOptions::default()).unwrap();
        let best = l1pca_oracle(&x).unwrap();
        prop_assert!(pd.objective <= best.objective + 1e-9);
    }

    #[test]
    fn deflation_leaves_no_component_along_w(x in (2usize..6, 3usize..20).prop_flat_map(|(d, n)| columns(d, n))) {
        prop_assume!(x.as_slice().iter().any(|v| v.abs() > 1e-3));
        let pd = l1pca_first_component(&x, &SolverOptions::default()).unwrap();
        let y = deflate_columns(&x, &pd.w).unwrap();
        for c in y.columns() {
            prop_assert!(dot(c, &pd.w).abs() <= 1e-9 * (1.0 + c.iter().map(|v| v.abs()).sum::<f64>()));
        }
    }

    #[test]
    fn greedy_components_are_orthonormal(x in (3usize..7, 10usize..30).prop_flat_map(|(d, n)| columns(d, n))) {
        let l = 3.min(x.dim());
        let l1 = l1pca_components(&x, l, &SolverOptions::default());
        prop_assume!(l1.is_ok());
        let comps = l1.unwrap();
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot(&comps[i].w, &comps[j].w) - want).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn l2_matches_power_iteration(x in (2usize..7, 20usize..40).prop_flat_map(|(d, n)| columns(d, n))) {
        let dim = x.dim();
        let ours = l2pca_components(&x, 1).unwrap();
        let s = scatter_matrix(x.as_slice(), dim);
        let theirs = power_iteration_components(&s, dim, 1, 1e-13, 100_000).unwrap();
        let (lambda, v) = &theirs[0];
        // Only compare directions when the leading eigenvalue is well separated.
        let second = power_iteration_components(&s, dim, 2, 1e-13, 100_000).unwrap()[1].0;
        prop_assume!(lambda - second > 1e-3 * lambda);
        prop_assert!((dot(&ours[0].w, v).abs() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn row_solvers_use_every_row_of_every_sample() {
    let samples = vec![vec![vec![1.0, 0.0], vec![0.0, 0.1]], vec![vec![2.0, 0.0]]];
    let r = RowDataSet::from_samples(&samples).unwrap();
    let l1 = l1_2dpca_components(&r, 2, &SolverOptions::default()).unwrap();
    let l2 = l2_2dpca_components(&r, 2).unwrap();
    // |3c + 0.1s| over the unit circle peaks at (3, 0.1) / sqrt(9.01).
    let n = 9.01f64.sqrt();
    assert!((l1[0].w[0].abs() - 3.0 / n).abs() < 1e-12);
    assert!((l1[0].w[1].abs() - 0.1 / n).abs() < 1e-12);
    assert!((l1[0].objective - n).abs() < 1e-12);
    // Scatter diag(5, 0.01).
    assert!((l2[0].w[0].abs() - 1.0).abs() < 1e-12);
}

fn clean_cloud(seed: u64, angle: f64) -> DataColumns {
    let mut r = rng::stream(seed, "clean-cloud", &[]);
    let (c, s) = (angle.cos(), angle.sin());
    let mut data = Vec::new();
    for _ in 0..200 {
        let a: f64 = r.sample::<f64, _>(StandardNormal) * 5.0;
        let b: f64 = r.sample::<f64, _>(StandardNormal) * 0.5;
        data.extend([a * c - b * s, a * s + b * c]);
    }
    DataColumns::new(2, data).unwrap()
}

#[test]
fn l1_and_l2_agree_on_clean_data() {
    let mut agree = 0;
    for seed in 0..50 {
        let angle = seed as f64 * 0.37;
        let x = clean_cloud(seed, angle);
        let a = l1pca_first_component(&x, &SolverOptions::default()).unwrap();
        let b = l2pca_components(&x, 1).unwrap();
        if dot(&a.w, &b[0].w).abs() >= 0.99 {
            agree += 1;
        }
    }
    assert_eq!(agree, 50);
}
