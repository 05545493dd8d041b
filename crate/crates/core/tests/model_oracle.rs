//! Model correctness against an independent dense solver.

mod common;

use common::{max_abs_diff, random_labels, random_matrix, ridge_oracle, seeded};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use relkit_core::model::{argmax_lowest, RlsModel};

#[test]
fn batch_fit_matches_dense_solve_on_random_problem() {
    let mut rng = seeded(42);
    let x = random_matrix(&mut rng, 50, 8);
    let labels = random_labels(&mut rng, 50, 4);
    let model = RlsModel::fit_batch(x.view(), &labels, 4, 1.0).unwrap();
    let expect = ridge_oracle(&x, &labels, 4, 1.0);
    let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = max_abs_diff(&model.weights().to_owned(), &expect);
    assert!(diff / scale < 1e-8, "relative error {}", diff / scale);
}

#[test]
fn single_update_equals_single_row_fit() {
    let mut rng = seeded(7);
    for _ in 0..5 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = rng.random_range(0..3);
        let mut incremental = RlsModel::new(6, 3, 0.5).unwrap();
        incremental.update(&x, label).unwrap();
        let row = Array2::from_shape_vec((1, 6), x.clone()).unwrap();
        let batch = RlsModel::fit_batch(row.view(), &[label], 3, 0.5).unwrap();
        let diff = max_abs_diff(
            &incremental.weights().to_owned(),
            &batch.weights().to_owned(),
        );
        assert!(diff < 1e-10, "{diff}");
        let oracle = ridge_oracle(&row, &[label], 3, 0.5);
        assert!(max_abs_diff(&incremental.weights().to_owned(), &oracle) < 1e-10);
    }
}

#[test]
fn appending_one_row_matches_refit() {
    let mut rng = seeded(11);
    let x = random_matrix(&mut rng, 200, 32);
    let labels = random_labels(&mut rng, 200, 5);
    let head = x.slice(ndarray::s![..199, ..]).to_owned();
    let mut model = RlsModel::fit_batch(head.view(), &labels[..199], 5, 1.0).unwrap();
    let last: Vec<f64> = x.row(199).to_vec();
    model.update(&last, labels[199]).unwrap();
    let full = RlsModel::fit_batch(x.view(), &labels, 5, 1.0).unwrap();
    let diff = max_abs_diff(&model.weights().to_owned(), &full.weights().to_owned());
    assert!(diff < 1e-6, "{diff}");
}

/// Interleaved batch + rank-one updates equal one big batch fit, and the
/// normal equations stay satisfied throughout.
#[test]
fn incremental_equals_batch_over_many_random_instances() {
    let mut rng = seeded(2024);
    for instance in 0..20 {
        let n = rng.random_range(20..=500);
        let d = rng.random_range(2..=64);
        let t = rng.random_range(2..=10);
        let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
        let x = random_matrix(&mut rng, n, d);
        let labels = random_labels(&mut rng, n, t);

        let split = rng.random_range(1..n);
        let head = x.slice(ndarray::s![..split, ..]).to_owned();
        let mut model = RlsModel::fit_batch(head.view(), &labels[..split], t, lambda).unwrap();
        for i in split..n {
            model.update(&x.row(i).to_vec(), labels[i]).unwrap();
            if i % 97 == 0 {
                let residual = model.normal_equation_residual();
                assert!(residual <= 1e-8, "instance {instance}: residual {residual}");
            }
        }
        let full = RlsModel::fit_batch(x.view(), &labels, t, lambda).unwrap();
        let diff = max_abs_diff(&model.weights().to_owned(), &full.weights().to_owned());
        assert!(diff < 1e-6, "instance {instance}: weight diff {diff}");
        assert_eq!(model.num_seen(), n as u64);
        assert!(model.normal_equation_residual() <= 1e-8);
    }
}

#[test]
fn weights_match_oracle_after_update_stream() {
    let mut rng = seeded(5);
    let x = random_matrix(&mut rng, 80, 12);
    let labels = random_labels(&mut rng, 80, 4);
    let mut model = RlsModel::new(12, 4, 2.0).unwrap();
    for i in 0..80 {
        model.update(&x.row(i).to_vec(), labels[i]).unwrap();
    }
    let oracle = ridge_oracle(&x, &labels, 4, 2.0);
    let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = max_abs_diff(&model.weights().to_owned(), &oracle);
    assert!(diff / scale < 1e-8, "relative error {}", diff / scale);
}

proptest! {
    /// argmax(s) = argmax(s + c·1): predictions only depend on score
    /// differences.
    #[test]
    fn argmax_is_shift_invariant(
        scores in proptest::collection::vec(-1e6f64..1e6, 1..20),
        shift in -1e6f64..1e6,
    ) {
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        prop_assert_eq!(argmax_lowest(&scores), argmax_lowest(&shifted));
    }

    /// Ties always resolve to the lowest index.
    #[test]
    fn argmax_prefers_low_indices_on_ties(
        value in -1e3f64..1e3,
        len in 1usize..12,
        pos in 0usize..12,
    ) {
        let pos = pos % len;
        let mut scores = vec![value; len];
        scores[pos] = value; // explicit tie everywhere
        prop_assert_eq!(argmax_lowest(&scores), 0);
    }
}
