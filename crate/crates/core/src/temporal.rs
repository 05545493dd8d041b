//! Sliding-window majority-vote filtering of prediction streams, and the
//! closed-form accuracy of majority voting over i.i.d. frames.

use std::collections::VecDeque;
use std::io::Write;

use serde::Serialize;

use crate::dataset::{FeatureDataset, SelectFilter};
use crate::error::{Error, Result};
use crate::model::{argmax_lowest, RlsModel};
use crate::reliability::{
    level_curve, subset_accuracy_distribution_with, AccuracyDistribution, ConfidenceCurve,
    CurvePlan,
};

/// Default frame period in seconds (one frame every 0.09 s).
pub const DEFAULT_FRAME_PERIOD: f64 = 0.09;

/// Default sweep windows: 1..=50 frames (0 to ~4.4 s of history).
pub fn default_windows() -> Vec<usize> {
    (1..=50).collect()
}

/// One scored frame of a prediction stream.
#[derive(Debug, Clone)]
pub struct TraceFrame {
    /// Session the frame belongs to; filters never cross session keys.
    pub session: String,
    pub seq: u32,
    pub scores: Vec<f64>,
    pub predicted: usize,
    pub true_class: usize,
}

/// Time-ordered per-frame scores and labels.
///
/// Built from a model via [`PredictionTrace::from_model`], where every
/// frame's `predicted` is the argmax of its scores. Filtering rewrites
/// `predicted` while leaving scores untouched.
#[derive(Debug, Clone, Default)]
pub struct PredictionTrace {
    pub frames: Vec<TraceFrame>,
}

impl PredictionTrace {
    /// Score every frame of `dataset` with `model`, in dataset order.
    pub fn from_model(model: &RlsModel, dataset: &FeatureDataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::invalid_argument("cannot trace an empty dataset"));
        }
        if dataset.dim != model.dim() {
            return Err(Error::invalid_argument(format!(
                "dataset dim {} does not match model dim {}",
                dataset.dim,
                model.dim()
            )));
        }
        let scores = model.decision_scores_batch(dataset.features_f64().view())?;
        let frames = dataset
            .frames
            .iter()
            .enumerate()
            .map(|(i, frame)| {
                let row: Vec<f64> = scores.row(i).to_vec();
                let predicted = argmax_lowest(&row);
                TraceFrame {
                    session: frame.session_key(),
                    seq: frame.session_seq,
                    scores: row,
                    predicted,
                    true_class: frame.class_id,
                }
            })
            .collect();
        Ok(PredictionTrace { frames })
    }

    /// Fraction of frames whose predicted label matches the truth.
    pub fn accuracy(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        let correct = self
            .frames
            .iter()
            .filter(|f| f.predicted == f.true_class)
            .count();
        correct as f64 / self.frames.len() as f64
    }
}

/// How multi-class ties in the window mode are broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Tied label with the largest decision score summed over the window.
    SummedScore,
    /// Tied label predicted most recently in the window.
    MostRecent,
}

/// Sliding-window filter parameters.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// Window size w: the current frame plus up to w−1 predecessors.
    pub window: usize,
    pub tie_rule: TieRule,
    /// Restart the window at session boundaries (on by default).
    pub session_reset: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            window: 1,
            tie_rule: TieRule::SummedScore,
            session_reset: true,
        }
    }
}

impl FilterConfig {
    pub fn with_window(window: usize) -> Self {
        FilterConfig {
            window,
            ..Default::default()
        }
    }
}

/// Probability that a strict majority of w i.i.d. per-frame decisions with
/// accuracy `accuracy` is correct: Σ_{k=⌊w/2⌋+1}^{w} C(w,k)·Aᵏ·(1−A)^{w−k}.
///
/// Exact binomial coefficients up to w = 50; log-space binomials with a
/// log-sum-exp reduction beyond that.
pub fn iid_majority_bound(accuracy: f64, window: usize) -> f64 {
    assert!(window >= 1, "window must be positive");
    assert!(
        (0.0..=1.0).contains(&accuracy),
        "accuracy must be in [0, 1]"
    );
    if accuracy == 0.0 {
        return 0.0;
    }
    if accuracy == 1.0 {
        return 1.0;
    }
    let first = window / 2 + 1;
    if window <= 50 {
        let mut total = 0.0;
        for k in first..=window {
            total += binomial_f64(window, k)
                * accuracy.powi(k as i32)
                * (1.0 - accuracy).powi((window - k) as i32);
        }
        total.min(1.0)
    } else {
        // log C(w,k) + k ln A + (w−k) ln(1−A), reduced with log-sum-exp.
        let ln_a = accuracy.ln();
        let ln_b = (1.0 - accuracy).ln();
        let mut ln_fact = vec![0.0f64; window + 1];
        for i in 1..=window {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        let mut terms = Vec::with_capacity(window - first + 1);
        let mut max_term = f64::NEG_INFINITY;
        for k in first..=window {
            let ln_c = ln_fact[window] - ln_fact[k] - ln_fact[window - k];
            let t = ln_c + k as f64 * ln_a + (window - k) as f64 * ln_b;
            max_term = max_term.max(t);
            terms.push(t);
        }
        let sum: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
        (max_term + sum.ln()).exp().min(1.0)
    }
}

/// C(n, k) as f64; exact for n ≤ 50.
fn binomial_f64(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Majority-vote filter over the trace.
///
/// Every output frame keeps its scores and true class; `predicted` becomes
/// the modal predicted label over the current frame and up to w−1
/// predecessors of the same session (all of them, when the session is
/// younger than w frames). Output length and order match the input.
pub fn filter_trace(trace: &PredictionTrace, cfg: &FilterConfig) -> PredictionTrace {
    assert!(cfg.window >= 1, "window must be positive");
    if cfg.window == 1 {
        return trace.clone();
    }
    let mut out = Vec::with_capacity(trace.frames.len());
    let mut window: VecDeque<usize> = VecDeque::with_capacity(cfg.window);
    let mut current_session: Option<&str> = None;
    for (i, frame) in trace.frames.iter().enumerate() {
        if cfg.session_reset && current_session != Some(frame.session.as_str()) {
            window.clear();
            current_session = Some(frame.session.as_str());
        }
        window.push_back(i);
        if window.len() > cfg.window {
            window.pop_front();
        }
        let filtered = window_mode(trace, &window, cfg.tie_rule);
        let mut new_frame = frame.clone();
        new_frame.predicted = filtered;
        out.push(new_frame);
    }
    PredictionTrace { frames: out }
}

fn window_mode(trace: &PredictionTrace, window: &VecDeque<usize>, tie_rule: TieRule) -> usize {
    let num_classes = trace.frames[*window.back().unwrap()].scores.len();
    let mut counts = vec![0usize; num_classes];
    for &i in window {
        counts[trace.frames[i].predicted] += 1;
    }
    let top = *counts.iter().max().unwrap();
    let tied: Vec<usize> = (0..num_classes).filter(|&c| counts[c] == top).collect();
    if tied.len() == 1 {
        return tied[0];
    }
    match tie_rule {
        TieRule::SummedScore => {
            let mut best = tied[0];
            let mut best_sum = f64::NEG_INFINITY;
            for &label in &tied {
                let sum: f64 = window.iter().map(|&i| trace.frames[i].scores[label]).sum();
                if sum > best_sum {
                    best_sum = sum;
                    best = label;
                }
            }
            best
        }
        TieRule::MostRecent => {
            for &i in window.iter().rev() {
                let label = trace.frames[i].predicted;
                if tied.contains(&label) {
                    return label;
                }
            }
            tied[0]
        }
    }
}

/// One row of a filter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct FilterSweepRow {
    pub window: usize,
    /// History length in seconds: (w−1)·frame_period.
    pub seconds: f64,
    pub accuracy: f64,
    /// i.i.d. majority bound evaluated at the trace's unfiltered accuracy.
    pub iid_bound: f64,
}

/// Filtered accuracy per window size, with the i.i.d. bound for reference.
pub fn filter_sweep(
    trace: &PredictionTrace,
    windows: &[usize],
    frame_period: f64,
) -> Result<Vec<FilterSweepRow>> {
    if trace.frames.is_empty() {
        return Err(Error::invalid_argument("cannot sweep an empty trace"));
    }
    if windows.is_empty() {
        return Err(Error::invalid_argument("no window sizes given"));
    }
    if windows.iter().any(|&w| w < 1) {
        return Err(Error::invalid_argument("window sizes must be >= 1"));
    }
    if !(frame_period > 0.0) || !frame_period.is_finite() {
        return Err(Error::invalid_argument("frame_period must be positive"));
    }
    let base_accuracy = trace.accuracy();
    let rows = windows
        .iter()
        .map(|&w| {
            let cfg = FilterConfig::with_window(w);
            let accuracy = filter_trace(trace, &cfg).accuracy();
            FilterSweepRow {
                window: w,
                seconds: (w - 1) as f64 * frame_period,
                accuracy,
                iid_bound: iid_majority_bound(base_accuracy, w),
            }
        })
        .collect();
    Ok(rows)
}

/// Sweep CSV: (w, seconds, accuracy, iid_bound_at_mean_A).
pub fn write_sweep_csv(rows: &[FilterSweepRow], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "w,seconds,accuracy,iid_bound_at_mean_A")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.window, row.seconds, row.accuracy, row.iid_bound
        )?;
    }
    Ok(())
}

/// Level curve where every subset trial's accuracy is measured after
/// majority-vote filtering of the test stream.
///
/// With window 1 this reduces exactly to the unfiltered level curve.
pub fn reliability_with_filter(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &CurvePlan,
    cfg: &FilterConfig,
    lambda: f64,
    level: f64,
) -> Result<ConfidenceCurve> {
    let dists = filtered_accuracy_distributions(train, test, plan, cfg, lambda)?;
    level_curve(&dists, level)
}

/// Unfiltered and filtered accuracy distributions from the same trials.
///
/// Each subset is fit once; both accuracies are read off the same trace, so
/// the pair equals what the unfiltered and filtered estimators produce when
/// run separately with the same plan, at half the cost.
pub fn paired_filter_distributions(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &CurvePlan,
    cfg: &FilterConfig,
    lambda: f64,
) -> Result<(
    std::collections::BTreeMap<usize, AccuracyDistribution>,
    std::collections::BTreeMap<usize, AccuracyDistribution>,
)> {
    let mut unfiltered = std::collections::BTreeMap::new();
    let mut filtered = std::collections::BTreeMap::new();
    for &t in &plan.t_values {
        let pairs: Vec<(f64, f64)> = crate::reliability::run_subset_trials(
            train,
            test,
            &plan.plan_for(t),
            lambda,
            |model, test_sub| {
                let trace = PredictionTrace::from_model(model, test_sub)?;
                let raw = trace.accuracy();
                let smoothed = filter_trace(&trace, cfg).accuracy();
                Ok((raw, smoothed))
            },
        )?;
        let (raw, smoothed): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        unfiltered.insert(
            t,
            AccuracyDistribution::from_samples(t, raw, crate::reliability::DEFAULT_BIN_WIDTH)?,
        );
        filtered.insert(
            t,
            AccuracyDistribution::from_samples(
                t,
                smoothed,
                crate::reliability::DEFAULT_BIN_WIDTH,
            )?,
        );
    }
    Ok((unfiltered, filtered))
}

/// The filtered analog of `reliability::accuracy_distributions`.
pub fn filtered_accuracy_distributions(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &CurvePlan,
    cfg: &FilterConfig,
    lambda: f64,
) -> Result<std::collections::BTreeMap<usize, AccuracyDistribution>> {
    let mut out = std::collections::BTreeMap::new();
    for &t in &plan.t_values {
        let dist = subset_accuracy_distribution_with(
            train,
            test,
            &plan.plan_for(t),
            lambda,
            |model, test_sub| {
                let trace = PredictionTrace::from_model(model, test_sub)?;
                Ok(filter_trace(&trace, cfg).accuracy())
            },
        )?;
        out.insert(t, dist);
    }
    Ok(out)
}

/// Select helper shared by callers restricting to one split before tracing.
pub fn session_subset(dataset: &FeatureDataset, filter: &SelectFilter) -> Result<FeatureDataset> {
    Ok(dataset.select(filter)?.dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_from_labels(predicted: &[usize], truth: &[usize]) -> PredictionTrace {
        let num_classes = predicted
            .iter()
            .chain(truth.iter())
            .max()
            .map(|&m| m + 1)
            .unwrap_or(1)
            .max(2);
        let frames = predicted
            .iter()
            .zip(truth.iter())
            .enumerate()
            .map(|(i, (&p, &t))| {
                let mut scores = vec![0.0; num_classes];
                scores[p] = 1.0;
                TraceFrame {
                    session: "s0".into(),
                    seq: i as u32,
                    scores,
                    predicted: p,
                    true_class: t,
                }
            })
            .collect();
        PredictionTrace { frames }
    }

    #[test]
    fn bound_matches_the_three_frame_case() {
        // 0.343 + 3·0.49·0.3 = 0.784
        let p = iid_majority_bound(0.7, 3);
        assert!((p - 0.784).abs() < 1e-12, "{p}");
    }

    #[test]
    fn bound_degenerate_cases() {
        assert_eq!(iid_majority_bound(0.42, 1), 0.42);
        assert_eq!(iid_majority_bound(1.0, 9), 1.0);
        assert_eq!(iid_majority_bound(0.0, 9), 0.0);
        for w in [1usize, 3, 5, 21, 49] {
            let p = iid_majority_bound(0.5, w);
            assert!((p - 0.5).abs() < 1e-12, "w={w}: {p}");
        }
    }

    #[test]
    fn bound_at_window_21_hits_097() {
        let p = iid_majority_bound(0.7, 21);
        assert!((p - 0.97).abs() < 0.005, "{p}");
    }

    #[test]
    fn log_path_agrees_with_exact_path_near_the_threshold() {
        // w = 50 uses the exact path, w = 51 the log path; values at the
        // same accuracy must line up smoothly.
        for a in [0.3, 0.55, 0.7, 0.9] {
            let exact = iid_majority_bound(a, 49);
            let log = iid_majority_bound(a, 51);
            // Both are odd windows; amplification grows with w for a>0.5
            // and shrinks for a<0.5.
            if a > 0.5 {
                assert!(log >= exact - 1e-12, "a={a}: {log} vs {exact}");
            } else {
                assert!(log <= exact + 1e-12, "a={a}: {log} vs {exact}");
            }
        }
        let p = iid_majority_bound(0.5, 10_001);
        assert!((p - 0.5).abs() < 1e-9, "{p}");
    }

    #[test]
    fn window_one_is_identity() {
        let trace = trace_from_labels(&[0, 1, 0, 1], &[0, 0, 0, 0]);
        let filtered = filter_trace(&trace, &FilterConfig::with_window(1));
        let labels: Vec<usize> = filtered.frames.iter().map(|f| f.predicted).collect();
        assert_eq!(labels, vec![0, 1, 0, 1]);
    }

    #[test]
    fn single_flicker_is_suppressed() {
        let trace = trace_from_labels(&[0, 0, 1, 0, 0], &[0; 5]);
        let filtered = filter_trace(&trace, &FilterConfig::with_window(3));
        let labels: Vec<usize> = filtered.frames.iter().map(|f| f.predicted).collect();
        assert_eq!(labels, vec![0, 0, 0, 0, 0]);
    }

    #[test]
    fn constant_stream_is_unchanged_for_any_window() {
        let trace = trace_from_labels(&[2; 9], &[2; 9]);
        for w in [1, 2, 5, 9, 20] {
            let filtered = filter_trace(&trace, &FilterConfig::with_window(w));
            assert!(filtered.frames.iter().all(|f| f.predicted == 2));
            assert_eq!(filtered.frames.len(), 9);
        }
    }

    #[test]
    fn sessions_are_never_mixed() {
        let mut trace = trace_from_labels(&[0, 0, 0, 1, 1, 1], &[0, 0, 0, 1, 1, 1]);
        for (i, frame) in trace.frames.iter_mut().enumerate() {
            frame.session = if i < 3 { "a".into() } else { "b".into() };
            frame.seq = (i % 3) as u32;
        }
        let filtered = filter_trace(&trace, &FilterConfig::with_window(5));
        let labels: Vec<usize> = filtered.frames.iter().map(|f| f.predicted).collect();
        // With session reset the second session starts fresh and keeps 1s.
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
        // Without reset the window spans the boundary and drags 0s along.
        let cfg = FilterConfig {
            window: 5,
            session_reset: false,
            ..Default::default()
        };
        let merged = filter_trace(&trace, &cfg);
        assert_eq!(merged.frames[3].predicted, 0);
    }

    #[test]
    fn tie_rules_differ_on_an_even_split() {
        // Window of 4: two 0s then two 1s. Scores favor label 0 overall.
        let mut trace = trace_from_labels(&[0, 0, 1, 1], &[0; 4]);
        for frame in trace.frames.iter_mut() {
            frame.scores = match frame.predicted {
                0 => vec![2.0, 0.0],
                _ => vec![0.9, 1.0],
            };
        }
        let summed = filter_trace(
            &trace,
            &FilterConfig {
                window: 4,
                tie_rule: TieRule::SummedScore,
                session_reset: true,
            },
        );
        // Summed score: label 0 has 2+2+0.9+0.9 = 5.8 > 2.0 for label 1.
        assert_eq!(summed.frames[3].predicted, 0);
        let recent = filter_trace(
            &trace,
            &FilterConfig {
                window: 4,
                tie_rule: TieRule::MostRecent,
                session_reset: true,
            },
        );
        assert_eq!(recent.frames[3].predicted, 1);
    }

    #[test]
    fn sweep_reports_per_window_accuracy() {
        let trace = trace_from_labels(&[0, 0, 1, 0, 0, 0], &[0; 6]);
        let rows = filter_sweep(&trace, &[1, 3], 0.09).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].accuracy - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(rows[1].accuracy, 1.0);
        assert_eq!(rows[0].seconds, 0.0);
        assert!((rows[1].seconds - 0.18).abs() < 1e-12);
        // Bound column is evaluated at the unfiltered accuracy.
        assert!((rows[1].iid_bound - iid_majority_bound(5.0 / 6.0, 3)).abs() < 1e-15);
    }

    #[test]
    fn perfect_trace_stays_perfect_for_all_windows() {
        let trace = trace_from_labels(&[1; 30], &[1; 30]);
        let rows = filter_sweep(&trace, &default_windows(), DEFAULT_FRAME_PERIOD).unwrap();
        assert!(rows.iter().all(|r| r.accuracy == 1.0));
    }

    #[test]
    fn filtering_preserves_length_and_order() {
        let trace = trace_from_labels(&[0, 1, 0, 1, 1, 0, 1], &[1; 7]);
        let filtered = filter_trace(&trace, &FilterConfig::with_window(3));
        assert_eq!(filtered.frames.len(), trace.frames.len());
        for (a, b) in filtered.frames.iter().zip(trace.frames.iter()) {
            assert_eq!(a.seq, b.seq);
            assert_eq!(a.session, b.session);
            assert_eq!(a.true_class, b.true_class);
            assert_eq!(a.scores, b.scores);
        }
    }
}
