//! One-vs-all regularized least squares classifier.
//!
//! The model solves (XᵀX + λI)·W = XᵀY for a ±1 one-vs-all label matrix Y.
//! State is carried as the upper Cholesky factor R of the regularized Gram
//! matrix together with the cross-moment B = XᵀY, so absorbing one more
//! training example is a rank-one factor update plus two triangular solves
//! and reproduces the batch solution exactly (up to rounding).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_upper, rank_one_update, solve_normal_equations};

/// Magic bytes of the model checkpoint format.
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RLS1";

/// One-vs-all ridge classifier state.
///
/// Readers (`decision_scores`, `predict`) take `&self` and may run from many
/// threads; writers (`update`) take `&mut self`, so the single-writer
/// contract is enforced by the borrow checker.
#[derive(Debug, Clone)]
pub struct RlsModel {
    dim: usize,
    num_classes: usize,
    lambda: f64,
    /// Upper-triangular R with RᵀR = XᵀX + λI.
    factor: Array2<f64>,
    /// B = XᵀY for the ±1 one-vs-all encoding Y.
    cross_moment: Array2<f64>,
    /// W = (XᵀX + λI)⁻¹ B, refreshed after every fit or update.
    weights: Array2<f64>,
    num_seen: u64,
}

impl RlsModel {
    /// Empty model: factor = √λ·I, zero cross-moment and weights.
    pub fn new(dim: usize, num_classes: usize, lambda: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::invalid_argument("dim must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::invalid_argument("num_classes must be at least 2"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid_argument("lambda must be a positive real"));
        }
        let factor = Array2::<f64>::eye(dim) * lambda.sqrt();
        Ok(RlsModel {
            dim,
            num_classes,
            lambda,
            factor,
            cross_moment: Array2::zeros((dim, num_classes)),
            weights: Array2::zeros((dim, num_classes)),
            num_seen: 0,
        })
    }

    /// Batch fit on `n` rows of features with their class ids.
    pub fn fit_batch(
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        num_classes: usize,
        lambda: f64,
    ) -> Result<Self> {
        let (n, dim) = (features.nrows(), features.ncols());
        if n < 1 {
            return Err(Error::invalid_argument("fit_batch needs at least one row"));
        }
        if labels.len() != n {
            return Err(Error::invalid_argument(format!(
                "label count {} does not match row count {n}",
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_data("features contain non-finite values"));
        }
        let mut model = Self::new(dim, num_classes, lambda)?;
        let encoded = encode_labels(labels, num_classes)?;

        let mut gram = features.t().dot(&features);
        for i in 0..dim {
            gram[(i, i)] += lambda;
        }
        model.factor = cholesky_upper(gram.view())?;
        model.cross_moment = features.t().dot(&encoded);
        model.weights =
            solve_normal_equations(model.factor.view(), model.cross_moment.view());
        model.num_seen = n as u64;
        Ok(model)
    }

    /// Absorb one example via a rank-one update of the Cholesky factor.
    ///
    /// Equivalent (within rounding) to refitting on the concatenated data.
    pub fn update(&mut self, x: &[f64], label: usize) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid_argument(format!(
                "feature length {} does not match model dim {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_data("feature vector contains non-finite values"));
        }
        if label >= self.num_classes {
            return Err(Error::invalid_argument(format!(
                "class id {label} out of range for {} classes",
                self.num_classes
            )));
        }
        rank_one_update(self.factor.view_mut(), x);
        for t in 0..self.num_classes {
            let y = if t == label { 1.0 } else { -1.0 };
            for (i, &xi) in x.iter().enumerate() {
                self.cross_moment[(i, t)] += xi * y;
            }
        }
        self.weights = solve_normal_equations(self.factor.view(), self.cross_moment.view());
        self.num_seen += 1;
        Ok(())
    }

    /// Per-class scores xᵀW.
    pub fn decision_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::invalid_argument(format!(
                "feature length {} does not match model dim {}",
                x.len(),
                self.dim
            )));
        }
        let mut scores = vec![0.0; self.num_classes];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (t, s) in scores.iter_mut().enumerate() {
                *s += xi * self.weights[(i, t)];
            }
        }
        Ok(scores)
    }

    /// Argmax of the decision scores; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_lowest(&self.decision_scores(x)?))
    }

    /// Score every row of a feature matrix at once: returns X·W (n×T).
    pub fn decision_scores_batch(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.dim {
            return Err(Error::invalid_argument(format!(
                "feature width {} does not match model dim {}",
                features.ncols(),
                self.dim
            )));
        }
        Ok(features.dot(&self.weights))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_seen(&self) -> u64 {
        self.num_seen
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn factor(&self) -> ArrayView2<'_, f64> {
        self.factor.view()
    }

    pub fn cross_moment(&self) -> ArrayView2<'_, f64> {
        self.cross_moment.view()
    }

    /// ‖(RᵀR)W − B‖∞ / (1 + ‖B‖∞), the normal-equation residual.
    pub fn normal_equation_residual(&self) -> f64 {
        let lhs = self.factor.t().dot(&self.factor).dot(&self.weights);
        let mut num: f64 = 0.0;
        let mut denom: f64 = 0.0;
        for (l, b) in lhs.iter().zip(self.cross_moment.iter()) {
            num = num.max((l - b).abs());
            denom = denom.max(b.abs());
        }
        num / (1.0 + denom)
    }

    /// Write the checkpoint: magic "RLS1", then little-endian u32 d, u32 T,
    /// f64 λ, u64 num_seen, then factor, cross-moment and weights as f64
    /// row-major. Round-trips bit-exactly.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let put = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
            w.write_all(bytes).map_err(|e| Error::io(path, e))
        };
        put(&mut w, CHECKPOINT_MAGIC)?;
        put(&mut w, &(self.dim as u32).to_le_bytes())?;
        put(&mut w, &(self.num_classes as u32).to_le_bytes())?;
        put(&mut w, &self.lambda.to_le_bytes())?;
        put(&mut w, &self.num_seen.to_le_bytes())?;
        for m in [&self.factor, &self.cross_moment, &self.weights] {
            for v in m.iter() {
                put(&mut w, &v.to_le_bytes())?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Load a checkpoint written by [`RlsModel::save_checkpoint`].
    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::invalid_data(format!(
                "{} is not a model checkpoint (bad magic)",
                path.display()
            )));
        }
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u32buf).map_err(|e| Error::io(path, e))?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf).map_err(|e| Error::io(path, e))?;
        let num_classes = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
        let lambda = f64::from_le_bytes(u64buf);
        r.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
        let num_seen = u64::from_le_bytes(u64buf);
        if dim < 1 || num_classes < 2 || !(lambda > 0.0) {
            return Err(Error::invalid_data(format!(
                "checkpoint header of {} is inconsistent (d={dim}, T={num_classes}, lambda={lambda})",
                path.display()
            )));
        }
        let mut read_matrix = |rows: usize, cols: usize| -> Result<Array2<f64>> {
            let mut data = vec![0.0f64; rows * cols];
            for v in data.iter_mut() {
                r.read_exact(&mut u64buf).map_err(|e| Error::io(path, e))?;
                *v = f64::from_le_bytes(u64buf);
            }
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::invalid_data(e.to_string()))
        };
        let factor = read_matrix(dim, dim)?;
        let cross_moment = read_matrix(dim, num_classes)?;
        let weights = read_matrix(dim, num_classes)?;
        let mut tail = [0u8; 1];
        match r.read(&mut tail) {
            Ok(0) => {}
            Ok(_) => {
                return Err(Error::invalid_data(format!(
                    "trailing bytes after checkpoint payload in {}",
                    path.display()
                )))
            }
            Err(e) => return Err(Error::io(path, e)),
        }
        Ok(RlsModel {
            dim,
            num_classes,
            lambda,
            factor,
            cross_moment,
            weights,
            num_seen,
        })
    }
}

/// ±1 one-vs-all encoding: row i has +1 at column `labels[i]`, −1 elsewhere.
pub fn encode_labels(labels: &[usize], num_classes: usize) -> Result<Array2<f64>> {
    let mut y = Array2::<f64>::from_elem((labels.len(), num_classes), -1.0);
    for (i, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::invalid_argument(format!(
                "class id {label} at row {i} out of range for {num_classes} classes"
            )));
        }
        y[(i, label)] = 1.0;
    }
    Ok(y)
}

/// Index of the largest score; the lowest index wins ties, so runs are
/// reproducible.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Accuracy table from a k-fold search over a λ grid.
#[derive(Debug, Clone)]
pub struct LambdaSearch {
    /// Grid value with the highest mean validation accuracy (ties: smaller λ).
    pub best: f64,
    /// (λ, mean validation accuracy) per grid point.
    pub scores: Vec<(f64, f64)>,
}

/// Logarithmic grid of `points` values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// k-fold grid search for λ. Never run implicitly; callers opt in.
///
/// Folds are contiguous blocks of the row order, so the search is
/// deterministic. Returns an error when any fold would leave the training
/// side empty.
pub fn kfold_lambda_search(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    folds: usize,
    grid: &[f64],
) -> Result<LambdaSearch> {
    let n = features.nrows();
    if folds < 2 || folds > n {
        return Err(Error::invalid_argument(format!(
            "fold count {folds} invalid for {n} rows"
        )));
    }
    if grid.is_empty() {
        return Err(Error::invalid_argument("lambda grid is empty"));
    }
    let bounds: Vec<(usize, usize)> = (0..folds)
        .map(|f| (f * n / folds, (f + 1) * n / folds))
        .collect();
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut acc_sum = 0.0;
        for &(lo, hi) in &bounds {
            let train_rows: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
            let mut x_train = Array2::<f64>::zeros((train_rows.len(), features.ncols()));
            let mut y_train = Vec::with_capacity(train_rows.len());
            for (r, &i) in train_rows.iter().enumerate() {
                x_train.row_mut(r).assign(&features.row(i));
                y_train.push(labels[i]);
            }
            let model = RlsModel::fit_batch(x_train.view(), &y_train, num_classes, lambda)?;
            let mut correct = 0usize;
            for i in lo..hi {
                let x: Vec<f64> = features.row(i).to_vec();
                if model.predict(&x)? == labels[i] {
                    correct += 1;
                }
            }
            acc_sum += correct as f64 / (hi - lo).max(1) as f64;
        }
        scores.push((lambda, acc_sum / folds as f64));
    }
    let mut best = scores[0].0;
    let mut best_acc = scores[0].1;
    for &(lambda, acc) in &scores[1..] {
        if acc > best_acc {
            best = lambda;
            best_acc = acc;
        }
    }
    Ok(LambdaSearch { best, scores })
}
