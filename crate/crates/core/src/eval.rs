//! Accuracy evaluation, cross-condition train/test matrices, incremental
//! learning curves, and mixed-source training sets.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{FeatureDataset, SelectFilter};
use crate::error::{Error, Result};
use crate::model::{argmax_lowest, RlsModel};

/// Scalar accuracy plus the per-class breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub num_correct: usize,
    pub num_total: usize,
    pub per_class_accuracy: Vec<f64>,
    pub per_class_correct: Vec<usize>,
    pub per_class_total: Vec<usize>,
}

/// Accuracy of `model` on every frame of `test`: correct guesses over the
/// whole test set. Classes absent from the test set report accuracy 0.
pub fn evaluate(model: &RlsModel, test: &FeatureDataset) -> Result<EvalResult> {
    if test.is_empty() {
        return Err(Error::invalid_argument("test set is empty"));
    }
    if test.dim != model.dim() {
        return Err(Error::invalid_argument(format!(
            "test dim {} does not match model dim {}",
            test.dim,
            model.dim()
        )));
    }
    if test.num_classes > model.num_classes() {
        return Err(Error::invalid_argument(format!(
            "test has {} classes but model only knows {}",
            test.num_classes,
            model.num_classes()
        )));
    }
    let scores = model.decision_scores_batch(test.features_f64().view())?;
    let t = model.num_classes();
    let mut per_class_correct = vec![0usize; t];
    let mut per_class_total = vec![0usize; t];
    let mut num_correct = 0usize;
    for (i, frame) in test.frames.iter().enumerate() {
        let row = scores.row(i);
        let predicted = argmax_lowest(row.as_slice().expect("contiguous row"));
        per_class_total[frame.class_id] += 1;
        if predicted == frame.class_id {
            per_class_correct[frame.class_id] += 1;
            num_correct += 1;
        }
    }
    let num_total = test.len();
    let per_class_accuracy = per_class_correct
        .iter()
        .zip(per_class_total.iter())
        .map(|(&c, &n)| if n > 0 { c as f64 / n as f64 } else { 0.0 })
        .collect();
    Ok(EvalResult {
        accuracy: num_correct as f64 / num_total as f64,
        num_correct,
        num_total,
        per_class_accuracy,
        per_class_correct,
        per_class_total,
    })
}

/// One train/test condition of a cross matrix.
#[derive(Debug, Clone)]
pub struct CrossCondition {
    pub tag: String,
    pub train: FeatureDataset,
    pub test: FeatureDataset,
}

/// Train-condition × test-condition accuracy matrix, with a pooled row that
/// mixes an equal share of every condition's training data.
#[derive(Debug, Clone, Serialize)]
pub struct CrossMatrix {
    pub row_tags: Vec<String>,
    pub col_tags: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub row_averages: Vec<f64>,
}

/// Evaluate every train condition against every test condition.
///
/// Each single-condition row trains on the first `per_class_budget` frames
/// per class; the pooled "all" row takes `per_class_budget / m` frames per
/// class from each of the m conditions, so all rows train on the same
/// number of examples. When `per_class_budget` is `None` the largest budget
/// divisible by m that every condition can supply is used.
pub fn cross_matrix(
    conditions: &[CrossCondition],
    lambda: f64,
    per_class_budget: Option<usize>,
) -> Result<CrossMatrix> {
    if conditions.is_empty() {
        return Err(Error::invalid_argument("no cross-matrix conditions given"));
    }
    let first = &conditions[0].train;
    for cond in conditions {
        if !cond.train.same_vocabulary(first) || !cond.test.same_vocabulary(first) {
            return Err(Error::invalid_argument(format!(
                "condition '{}' does not share the class vocabulary",
                cond.tag
            )));
        }
    }
    let m = conditions.len();
    let min_available = conditions
        .iter()
        .flat_map(|c| c.train.class_counts())
        .min()
        .unwrap_or(0);
    let budget = match per_class_budget {
        Some(k) => {
            if k < m || k % m != 0 {
                return Err(Error::invalid_argument(format!(
                    "per-class budget {k} must be a positive multiple of the {m} conditions"
                )));
            }
            if k > min_available {
                return Err(Error::invalid_argument(format!(
                    "per-class budget {k} exceeds the smallest per-class count {min_available}"
                )));
            }
            k
        }
        None => {
            let k = (min_available / m) * m;
            if k == 0 {
                return Err(Error::invalid_argument(
                    "conditions are too small for an equal-size pooled row",
                ));
            }
            k
        }
    };

    let mut row_models: Vec<(String, RlsModel)> = conditions
        .par_iter()
        .map(|cond| {
            let train = cond
                .train
                .select(&SelectFilter::default().with_first_k(budget))?
                .dataset;
            let model = RlsModel::fit_batch(
                train.features_f64().view(),
                &train.class_ids(),
                train.num_classes,
                lambda,
            )?;
            Ok((cond.tag.clone(), model))
        })
        .collect::<Result<Vec<_>>>()?;

    let sources: Vec<FeatureDataset> = conditions.iter().map(|c| c.train.clone()).collect();
    let mixed = build_mixed(&sources, budget / m)?;
    let pooled = RlsModel::fit_batch(
        mixed.features_f64().view(),
        &mixed.class_ids(),
        mixed.num_classes,
        lambda,
    )?;
    row_models.push(("all".into(), pooled));

    let col_tags: Vec<String> = conditions.iter().map(|c| c.tag.clone()).collect();
    let cells: Vec<Vec<f64>> = row_models
        .par_iter()
        .map(|(_, model)| {
            conditions
                .iter()
                .map(|cond| evaluate(model, &cond.test).map(|r| r.accuracy))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let row_averages = cells
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    Ok(CrossMatrix {
        row_tags: row_models.into_iter().map(|(tag, _)| tag).collect(),
        col_tags,
        cells,
        row_averages,
    })
}

/// Accuracy trajectory of a classifier trained one example at a time.
#[derive(Debug, Clone, Serialize)]
pub struct LearningCurve {
    /// Cumulative training examples per class at each checkpoint.
    pub checkpoints: Vec<usize>,
    pub accuracies: Vec<f64>,
    /// Source whose data the checkpoint's newest example came from.
    pub segment_tags: Vec<String>,
}

/// Feed `sources` in order through rank-one updates, evaluating on `test`
/// every `step` examples per class and at each source boundary.
///
/// Within a source, frames are interleaved round-robin across classes
/// (class 0 frame k, class 1 frame k, ...) so "examples per class" is well
/// defined on the x-axis.
pub fn incremental_curve(
    sources: &[FeatureDataset],
    test: &FeatureDataset,
    step: usize,
    lambda: f64,
) -> Result<LearningCurve> {
    if sources.is_empty() {
        return Err(Error::invalid_argument("no training sources given"));
    }
    if step < 1 {
        return Err(Error::invalid_argument("step must be >= 1"));
    }
    for src in sources {
        if !src.same_vocabulary(test) {
            return Err(Error::invalid_argument(format!(
                "source '{}' does not share the test vocabulary",
                src.name
            )));
        }
    }
    let mut model = RlsModel::new(test.dim, test.num_classes, lambda)?;
    let mut curve = LearningCurve {
        checkpoints: Vec::new(),
        accuracies: Vec::new(),
        segment_tags: Vec::new(),
    };
    let mut consumed_per_class = 0usize;
    for src in sources {
        let by_class = src.frames_by_class();
        let rounds = by_class.iter().map(|v| v.len()).max().unwrap_or(0);
        for round in 0..rounds {
            for class_frames in &by_class {
                if let Some(frame) = class_frames.get(round) {
                    let x: Vec<f64> = frame.features.iter().map(|&v| v as f64).collect();
                    model.update(&x, frame.class_id)?;
                }
            }
            consumed_per_class += 1;
            let at_source_end = round + 1 == rounds;
            if consumed_per_class % step == 0 || at_source_end {
                let acc = evaluate(&model, test)?.accuracy;
                // A source boundary aligned with a step still yields one point.
                if curve.checkpoints.last() == Some(&consumed_per_class) {
                    continue;
                }
                curve.checkpoints.push(consumed_per_class);
                curve.accuracies.push(acc);
                curve.segment_tags.push(src.name.clone());
            }
        }
    }
    Ok(curve)
}

/// Equal-share training mix: the first `per_source_k` frames per class from
/// every source, concatenated in source order.
pub fn build_mixed(sources: &[FeatureDataset], per_source_k: usize) -> Result<FeatureDataset> {
    if sources.is_empty() {
        return Err(Error::invalid_argument("no sources to mix"));
    }
    if per_source_k < 1 {
        return Err(Error::invalid_argument("per_source_k must be >= 1"));
    }
    let first = &sources[0];
    for src in &sources[1..] {
        if !src.same_vocabulary(first) {
            return Err(Error::invalid_argument(format!(
                "source '{}' does not share the class vocabulary",
                src.name
            )));
        }
    }
    for src in sources {
        for (class, &count) in src.class_counts().iter().enumerate() {
            if count < per_source_k {
                return Err(Error::invalid_argument(format!(
                    "class '{}' has only {count} frames in source '{}' (need {per_source_k})",
                    src.class_names[class], src.name
                )));
            }
        }
    }
    let mut mixed = FeatureDataset {
        name: "mixed".into(),
        dim: first.dim,
        num_classes: first.num_classes,
        class_names: first.class_names.clone(),
        categories: first.categories.clone(),
        frames: Vec::new(),
    };
    for src in sources {
        let sel = src.select(&SelectFilter::default().with_first_k(per_source_k))?;
        mixed.frames.extend(sel.dataset.frames);
    }
    Ok(mixed)
}

/// Cross-matrix CSV: header of test tags plus an average column, one row
/// per train condition.
pub fn write_cross_matrix_csv(matrix: &CrossMatrix, w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "train\\test")?;
    for tag in &matrix.col_tags {
        write!(w, ",{tag}")?;
    }
    writeln!(w, ",average")?;
    for (i, row_tag) in matrix.row_tags.iter().enumerate() {
        write!(w, "{row_tag}")?;
        for v in &matrix.cells[i] {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{}", matrix.row_averages[i])?;
    }
    Ok(())
}

/// Learning-curve CSV: (examples_per_class, accuracy, segment) rows.
pub fn write_learning_curve_csv(curve: &LearningCurve, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "examples_per_class,accuracy,segment")?;
    for i in 0..curve.checkpoints.len() {
        writeln!(
            w,
            "{},{},{}",
            curve.checkpoints[i], curve.accuracies[i], curve.segment_tags[i]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FrameRecord, Split};

    /// Two well-separated classes, `n` frames each, single day.
    fn separable(n: usize, day: u32, name: &str) -> FeatureDataset {
        let mut frames = Vec::new();
        for split in [Split::Train, Split::Test] {
            for class in 0..2usize {
                for seq in 0..n as u32 {
                    let sign = if class == 0 { -1.0 } else { 1.0 };
                    frames.push(FrameRecord {
                        features: vec![sign * 2.0 + 0.01 * seq as f32, sign],
                        class_id: class,
                        object_name: format!("obj{class}"),
                        category_name: "cat0".into(),
                        day,
                        split,
                        session_seq: seq,
                        variant: "default".into(),
                    });
                }
            }
        }
        FeatureDataset {
            name: name.into(),
            dim: 2,
            num_classes: 2,
            class_names: vec!["obj0".into(), "obj1".into()],
            categories: vec!["cat0".into(), "cat0".into()],
            frames,
        }
    }

    fn fit(ds: &FeatureDataset, lambda: f64) -> RlsModel {
        RlsModel::fit_batch(
            ds.features_f64().view(),
            &ds.class_ids(),
            ds.num_classes,
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn perfect_model_scores_one() {
        let ds = separable(10, 1, "sep");
        let train = ds.select(&SelectFilter::split(Split::Train)).unwrap().dataset;
        let test = ds.select(&SelectFilter::split(Split::Test)).unwrap().dataset;
        let model = fit(&train, 1.0);
        let result = evaluate(&model, &test).unwrap();
        assert_eq!(result.accuracy, 1.0);
        assert_eq!(result.num_correct, result.num_total);
        assert!(result.per_class_accuracy.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn constant_predictor_on_balanced_classes_scores_half() {
        // An untrained model scores 0 everywhere and predicts class 0.
        let ds = separable(10, 1, "sep");
        let test = ds.select(&SelectFilter::split(Split::Test)).unwrap().dataset;
        let model = RlsModel::new(2, 2, 1.0).unwrap();
        let result = evaluate(&model, &test).unwrap();
        assert_eq!(result.accuracy, 0.5);
        assert_eq!(result.per_class_accuracy, vec![1.0, 0.0]);
    }

    #[test]
    fn evaluate_rejects_empty_test() {
        let model = RlsModel::new(2, 2, 1.0).unwrap();
        let empty = FeatureDataset {
            name: "empty".into(),
            dim: 2,
            num_classes: 2,
            class_names: vec!["a".into(), "b".into()],
            categories: vec!["c".into(), "c".into()],
            frames: Vec::new(),
        };
        assert!(matches!(
            evaluate(&model, &empty),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let ds = separable(8, 1, "sep");
        let test = ds.select(&SelectFilter::split(Split::Test)).unwrap().dataset;
        let model = fit(
            &ds.select(&SelectFilter::split(Split::Train)).unwrap().dataset,
            0.5,
        );
        let forward = evaluate(&model, &test).unwrap();
        let mut reversed = test.clone();
        reversed.frames.reverse();
        // Reversal breaks seq ordering within sessions, which evaluate
        // does not care about.
        let backward = evaluate(&model, &reversed).unwrap();
        assert_eq!(forward.accuracy, backward.accuracy);
    }

    #[test]
    fn single_condition_matrix_equals_plain_evaluate() {
        let ds = separable(10, 1, "sep");
        let train = ds.select(&SelectFilter::split(Split::Train)).unwrap().dataset;
        let test = ds.select(&SelectFilter::split(Split::Test)).unwrap().dataset;
        let matrix = cross_matrix(
            &[CrossCondition {
                tag: "day1".into(),
                train: train.clone(),
                test: test.clone(),
            }],
            1.0,
            None,
        )
        .unwrap();
        assert_eq!(matrix.row_tags, vec!["day1", "all"]);
        let direct = evaluate(&fit(&train, 1.0), &test).unwrap().accuracy;
        assert_eq!(matrix.cells[0][0], direct);
        // One source: the pooled row consumes the same data.
        assert_eq!(matrix.cells[1][0], direct);
    }

    #[test]
    fn mixed_set_takes_first_k_from_each_source() {
        let day1 = separable(10, 1, "day1");
        let day2 = separable(10, 2, "day2");
        let mixed = build_mixed(&[day1, day2], 3).unwrap();
        assert_eq!(mixed.len(), 2 * 2 * 3);
        let counts = mixed.class_counts();
        assert_eq!(counts, vec![6, 6]);
    }

    #[test]
    fn build_mixed_names_the_offending_class_and_source() {
        let day1 = separable(10, 1, "day1");
        let day2 = separable(2, 2, "day2");
        let err = build_mixed(&[day1, day2], 5).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("day2") && msg.contains("obj0"), "{msg}");
    }

    #[test]
    fn incremental_final_checkpoint_matches_batch() {
        let ds = separable(12, 1, "sep");
        let train = ds.select(&SelectFilter::split(Split::Train)).unwrap().dataset;
        let test = ds.select(&SelectFilter::split(Split::Test)).unwrap().dataset;
        let curve = incremental_curve(&[train.clone()], &test, 5, 1.0).unwrap();
        assert_eq!(*curve.checkpoints.last().unwrap(), 12);
        let batch_acc = evaluate(&fit(&train, 1.0), &test).unwrap().accuracy;
        let last = *curve.accuracies.last().unwrap();
        assert!((last - batch_acc).abs() < 1e-6);
        // Deterministic run-to-run.
        let again = incremental_curve(&[train], &test, 5, 1.0).unwrap();
        assert_eq!(curve.accuracies, again.accuracies);
        assert_eq!(curve.checkpoints, again.checkpoints);
    }

    #[test]
    fn curve_csv_has_one_row_per_checkpoint() {
        let curve = LearningCurve {
            checkpoints: vec![5, 10],
            accuracies: vec![0.5, 0.75],
            segment_tags: vec!["day1".into(), "day1".into()],
        };
        let mut buf = Vec::new();
        write_learning_curve_csv(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("5,0.5,"));
    }
}
