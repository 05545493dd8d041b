//! Shared test oracles, independent of the library's solve path.

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian elimination with partial pivoting. The library solves through a
/// Cholesky factor; this deliberately does not.
pub fn solve_dense(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    let cols = b.ncols();
    let mut aug = Array2::<f64>::zeros((n, n + cols));
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        for j in 0..cols {
            aug[(i, n + j)] = b[(i, j)];
        }
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if aug[(row, col)].abs() > aug[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            for j in 0..n + cols {
                let tmp = aug[(col, j)];
                aug[(col, j)] = aug[(pivot, j)];
                aug[(pivot, j)] = tmp;
            }
        }
        let diag = aug[(col, col)];
        assert!(diag.abs() > 1e-300, "singular system in oracle");
        for row in col + 1..n {
            let factor = aug[(row, col)] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n + cols {
                aug[(row, j)] -= factor * aug[(col, j)];
            }
        }
    }
    let mut x = Array2::<f64>::zeros((n, cols));
    for j in 0..cols {
        for row in (0..n).rev() {
            let mut s = aug[(row, n + j)];
            for k in row + 1..n {
                s -= aug[(row, k)] * x[(k, j)];
            }
            x[(row, j)] = s / aug[(row, row)];
        }
    }
    x
}

/// Ridge weights (XᵀX + λI)⁻¹XᵀY via the dense oracle, with Y the ±1
/// one-vs-all encoding of the labels.
pub fn ridge_oracle(x: &Array2<f64>, labels: &[usize], num_classes: usize, lambda: f64) -> Array2<f64> {
    let d = x.ncols();
    let mut y = Array2::<f64>::from_elem((labels.len(), num_classes), -1.0);
    for (i, &label) in labels.iter().enumerate() {
        y[(i, label)] = 1.0;
    }
    let mut gram = x.t().dot(x);
    for i in 0..d {
        gram[(i, i)] += lambda;
    }
    let rhs = x.t().dot(&y);
    solve_dense(&gram, &rhs)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, num_classes: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..num_classes)).collect()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hand-built Gaussian class clusters with one train and one test session
/// per class, i.i.d. noise. Gives full control over the class geometry.
pub fn gaussian_dataset(
    means: &[Vec<f64>],
    sigma: f64,
    frames_per_class: usize,
    seed: u64,
) -> relkit_core::FeatureDataset {
    use relkit_core::{FeatureDataset, FrameRecord, Split};
    let num_classes = means.len();
    let dim = means[0].len();
    let mut rng = seeded(seed);
    let mut frames = Vec::new();
    for (class, mean) in means.iter().enumerate() {
        for split in [Split::Train, Split::Test] {
            for seq in 0..frames_per_class {
                let features: Vec<f32> = mean
                    .iter()
                    .map(|&m| (m + sigma * rng.sample::<f64, _>(StandardNormal)) as f32)
                    .collect();
                frames.push(FrameRecord {
                    features,
                    class_id: class,
                    object_name: format!("obj{class}"),
                    category_name: "cat0".into(),
                    day: 1,
                    split,
                    session_seq: seq as u32,
                    variant: "default".into(),
                });
            }
        }
    }
    let ds = FeatureDataset {
        name: "gaussian".into(),
        dim,
        num_classes,
        class_names: (0..num_classes).map(|c| format!("obj{c}")).collect(),
        categories: vec!["cat0".into(); num_classes],
        frames,
    };
    ds.validate().unwrap();
    ds
}

/// All k-subsets of 0..n, recursively; independent of the library sampler.
pub fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == k {
            out.push(acc.clone());
            return;
        }
        for i in start..n {
            acc.push(i);
            go(i + 1, n, k, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}
