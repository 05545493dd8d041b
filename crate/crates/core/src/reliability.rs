//! Reliability estimation over random class subsets.
//!
//! For each subset size t, many classifiers are trained on random subsets of
//! t classes and their test accuracies collected into an empirical
//! distribution P(acc = A | t). From those distributions come confidence
//! values c(A,t) (the mass at accuracy ≥ A), level curves A*(t, C), and the
//! final datasheet: the largest t that still reaches a target accuracy per
//! confidence level.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{FeatureDataset, SelectFilter};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::RlsModel;
use crate::seed::derive_seed;

/// Default number of subset trials per t.
pub const DEFAULT_NUM_TRIALS: usize = 400;

/// Default histogram bin width for reporting.
pub const DEFAULT_BIN_WIDTH: f64 = 0.02;

/// Sampling plan for one subset size.
#[derive(Debug, Clone)]
pub struct SubsetTrialPlan {
    /// Classes per trial; at least 2 and at most the vocabulary size.
    pub t: usize,
    pub num_trials: usize,
    /// Reject duplicate subsets. When C(T,t) ≤ num_trials the sampler
    /// degenerates to exhaustive enumeration of all subsets.
    pub dedupe: bool,
    pub master_seed: u64,
}

impl SubsetTrialPlan {
    pub fn new(t: usize, master_seed: u64) -> Self {
        SubsetTrialPlan {
            t,
            num_trials: DEFAULT_NUM_TRIALS,
            dedupe: true,
            master_seed,
        }
    }

    pub fn with_trials(mut self, num_trials: usize) -> Self {
        self.num_trials = num_trials;
        self
    }

    pub fn with_dedupe(mut self, dedupe: bool) -> Self {
        self.dedupe = dedupe;
        self
    }
}

/// C(n, k), capped: returns `cap + 1` as soon as the count exceeds `cap`.
fn binomial_capped(n: usize, k: usize, cap: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > cap as u128 {
            return cap + 1;
        }
    }
    c as usize
}

/// All k-subsets of 0..n in lexicographic order.
fn enumerate_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// Sample class subsets per the plan.
///
/// Each trial draws its subset from an RNG seeded by
/// `derive_seed(master_seed, t, trial_index)`, so results do not depend on
/// execution order. With dedupe on and C(T,t) ≤ num_trials, all distinct
/// subsets are returned instead.
pub fn sample_class_subsets(
    total_classes: usize,
    plan: &SubsetTrialPlan,
) -> Result<Vec<Vec<usize>>> {
    if plan.t < 2 || plan.t > total_classes {
        return Err(Error::invalid_argument(format!(
            "subset size {} out of range 2..={total_classes}",
            plan.t
        )));
    }
    if plan.num_trials < 1 {
        return Err(Error::invalid_argument("num_trials must be >= 1"));
    }
    if plan.dedupe {
        let distinct = binomial_capped(total_classes, plan.t, plan.num_trials);
        if distinct <= plan.num_trials {
            return Ok(enumerate_subsets(total_classes, plan.t));
        }
    }
    let mut subsets = Vec::with_capacity(plan.num_trials);
    let mut seen = std::collections::HashSet::new();
    let mut attempt: u64 = 0;
    let max_attempts = plan.num_trials as u64 * 64 + 4096;
    while subsets.len() < plan.num_trials {
        if attempt >= max_attempts {
            return Err(Error::invalid_argument(
                "could not draw enough distinct class subsets",
            ));
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(plan.master_seed, plan.t as u64, attempt));
        attempt += 1;
        let mut ids = rand::seq::index::sample(&mut rng, total_classes, plan.t).into_vec();
        ids.sort_unstable();
        if plan.dedupe && !seen.insert(ids.clone()) {
            continue;
        }
        subsets.push(ids);
    }
    Ok(subsets)
}

/// Normalized histogram of subset-trial accuracies for one t, with the raw
/// samples and their statistics.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracyDistribution {
    pub t: usize,
    pub bin_width: f64,
    /// Histogram over [0,1]; sums to 1.
    pub bins: Vec<f64>,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl AccuracyDistribution {
    /// Build from raw accuracy samples (population std, so one sample
    /// yields std 0).
    pub fn from_samples(t: usize, samples: Vec<f64>, bin_width: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid_argument("no accuracy samples"));
        }
        if !(bin_width > 0.0 && bin_width <= 1.0) {
            return Err(Error::invalid_argument("bin_width must be in (0, 1]"));
        }
        let num_bins = (1.0 / bin_width).ceil() as usize;
        let mut bins = vec![0.0; num_bins];
        for &a in &samples {
            let idx = ((a / bin_width).floor() as usize).min(num_bins - 1);
            bins[idx] += 1.0;
        }
        let n = samples.len() as f64;
        for b in bins.iter_mut() {
            *b /= n;
        }
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        Ok(AccuracyDistribution {
            t,
            bin_width,
            bins,
            samples,
            mean,
            std: var.sqrt(),
        })
    }

    /// c(A,t): fraction of samples with accuracy ≥ A. Computed on the raw
    /// samples, not the histogram, so bin edges introduce no bias.
    pub fn confidence(&self, a: f64) -> f64 {
        let hits = self.samples.iter().filter(|&&s| s >= a).count();
        hits as f64 / self.samples.len() as f64
    }

    /// A*(t, C): the largest attained accuracy value still reached with
    /// confidence ≥ C (0 when below every sample, which cannot happen for
    /// C ≤ 1).
    pub fn guaranteed_accuracy(&self, level: f64) -> f64 {
        let mut values: Vec<f64> = self.samples.clone();
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let n = values.len() as f64;
        let mut at_or_above = 0usize;
        let mut i = 0;
        while i < values.len() {
            let v = values[i];
            let mut j = i;
            while j < values.len() && values[j] == v {
                j += 1;
            }
            at_or_above = j;
            if at_or_above as f64 / n >= level {
                return v;
            }
            i = j;
        }
        let _ = at_or_above;
        0.0
    }
}

/// Free-function form of [`AccuracyDistribution::confidence`].
pub fn confidence(dist: &AccuracyDistribution, a: f64) -> f64 {
    dist.confidence(a)
}

/// Minimum accuracy guaranteed per t at one confidence level.
#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceCurve {
    pub level: f64,
    /// t → A*(t, level).
    pub points: BTreeMap<usize, f64>,
}

/// Level curve A*(t, C) across a family of distributions.
pub fn level_curve(
    dists: &BTreeMap<usize, AccuracyDistribution>,
    level: f64,
) -> Result<ConfidenceCurve> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid_argument(format!(
            "confidence level {level} must be in (0, 1]"
        )));
    }
    let points = dists
        .iter()
        .map(|(&t, dist)| (t, dist.guaranteed_accuracy(level)))
        .collect();
    Ok(ConfidenceCurve { level, points })
}

/// Datasheet: per confidence level, the largest class count whose
/// guaranteed accuracy still meets the target.
#[derive(Debug, Clone, Serialize)]
pub struct Datasheet {
    pub target_accuracy: f64,
    pub rows: Vec<DatasheetRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasheetRow {
    pub level: f64,
    /// 0 when no t reaches the target at this level.
    pub max_t: usize,
}

/// Build the datasheet. `dists` must cover a contiguous range of t; no
/// interpolation happens across gaps.
pub fn datasheet(
    dists: &BTreeMap<usize, AccuracyDistribution>,
    confidence_levels: &[f64],
    target_accuracy: f64,
) -> Result<Datasheet> {
    if dists.is_empty() {
        return Err(Error::invalid_argument("no distributions given"));
    }
    if confidence_levels.is_empty() {
        return Err(Error::invalid_argument("no confidence levels given"));
    }
    if !(0.0..=1.0).contains(&target_accuracy) {
        return Err(Error::invalid_argument("target accuracy must be in [0, 1]"));
    }
    let t_min = *dists.keys().next().unwrap();
    let t_max = *dists.keys().last().unwrap();
    if dists.len() != t_max - t_min + 1 {
        return Err(Error::invalid_argument(
            "distributions must cover a contiguous range of t",
        ));
    }
    let mut rows = Vec::with_capacity(confidence_levels.len());
    for &level in confidence_levels {
        let curve = level_curve(dists, level)?;
        let max_t = curve
            .points
            .iter()
            .filter(|(_, &a)| a >= target_accuracy)
            .map(|(&t, _)| t)
            .max()
            .unwrap_or(0);
        rows.push(DatasheetRow { level, max_t });
    }
    Ok(Datasheet {
        target_accuracy,
        rows,
    })
}

/// Run one subset trial per sampled subset: restrict train and test to the
/// subset, fit, and hand the model plus test subset to `trial`.
///
/// Trials are embarrassingly parallel; results are collected in trial
/// order, so the outcome does not depend on the worker count.
pub fn run_subset_trials<S, F>(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &SubsetTrialPlan,
    lambda: f64,
    trial: F,
) -> Result<Vec<S>>
where
    S: Send,
    F: Fn(&RlsModel, &FeatureDataset) -> Result<S> + Sync,
{
    if !train.same_vocabulary(test) {
        return Err(Error::invalid_argument(
            "train and test do not share the class vocabulary",
        ));
    }
    let train_counts = train.class_counts();
    let test_counts = test.class_counts();
    for class in 0..train.num_classes {
        if train_counts[class] == 0 || test_counts[class] == 0 {
            return Err(Error::invalid_argument(format!(
                "class '{}' is missing from the train or test split",
                train.class_names[class]
            )));
        }
    }
    let subsets = sample_class_subsets(train.num_classes, plan)?;
    subsets
        .par_iter()
        .map(|subset| {
            let filter = SelectFilter::default().with_classes(subset.clone());
            let train_sub = train.select(&filter)?.dataset;
            let test_sub = test.select(&filter)?.dataset;
            let model = RlsModel::fit_batch(
                train_sub.features_f64().view(),
                &train_sub.class_ids(),
                train_sub.num_classes,
                lambda,
            )?;
            trial(&model, &test_sub)
        })
        .collect::<Result<Vec<S>>>()
}

/// Accuracy distribution where each trial's accuracy comes from
/// `trial_accuracy` applied to the fitted model and the test subset.
pub fn subset_accuracy_distribution_with<F>(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &SubsetTrialPlan,
    lambda: f64,
    trial_accuracy: F,
) -> Result<AccuracyDistribution>
where
    F: Fn(&RlsModel, &FeatureDataset) -> Result<f64> + Sync,
{
    let samples = run_subset_trials(train, test, plan, lambda, trial_accuracy)?;
    AccuracyDistribution::from_samples(plan.t, samples, DEFAULT_BIN_WIDTH)
}

/// Empirical P(acc = A | t): restrict train and test to each sampled class
/// subset, fit, evaluate, and histogram the accuracies.
pub fn subset_accuracy_distribution(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &SubsetTrialPlan,
    lambda: f64,
) -> Result<AccuracyDistribution> {
    subset_accuracy_distribution_with(train, test, plan, lambda, |model, test_sub| {
        Ok(evaluate(model, test_sub)?.accuracy)
    })
}

/// Plan spanning a range of subset sizes; each t inherits the trial count,
/// dedupe flag and master seed.
#[derive(Debug, Clone)]
pub struct CurvePlan {
    pub t_values: Vec<usize>,
    pub num_trials: usize,
    pub dedupe: bool,
    pub master_seed: u64,
}

impl CurvePlan {
    /// Inclusive range t_min..=t_max.
    pub fn over_range(
        t_min: usize,
        t_max: usize,
        num_trials: usize,
        master_seed: u64,
    ) -> Result<Self> {
        if t_min < 2 || t_max < t_min {
            return Err(Error::invalid_argument(format!(
                "invalid t range {t_min}..={t_max}"
            )));
        }
        Ok(CurvePlan {
            t_values: (t_min..=t_max).collect(),
            num_trials,
            dedupe: true,
            master_seed,
        })
    }

    pub fn plan_for(&self, t: usize) -> SubsetTrialPlan {
        SubsetTrialPlan {
            t,
            num_trials: self.num_trials,
            dedupe: self.dedupe,
            master_seed: self.master_seed,
        }
    }
}

/// One accuracy distribution per t in the plan.
pub fn accuracy_distributions(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &CurvePlan,
    lambda: f64,
) -> Result<BTreeMap<usize, AccuracyDistribution>> {
    let mut out = BTreeMap::new();
    for &t in &plan.t_values {
        let dist = subset_accuracy_distribution(train, test, &plan.plan_for(t), lambda)?;
        out.insert(t, dist);
    }
    Ok(out)
}

/// Distribution CSV: (t, bin_center, mass) for every bin of every t.
pub fn write_distribution_csv(
    dists: &BTreeMap<usize, AccuracyDistribution>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "t,bin_center,mass")?;
    for (t, dist) in dists {
        for (i, mass) in dist.bins.iter().enumerate() {
            let center = (i as f64 + 0.5) * dist.bin_width;
            writeln!(w, "{t},{center},{mass}")?;
        }
    }
    Ok(())
}

/// Summary CSV: (t, mean, std, num_trials).
pub fn write_distribution_summary_csv(
    dists: &BTreeMap<usize, AccuracyDistribution>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "t,mean,std,num_trials")?;
    for (t, dist) in dists {
        writeln!(w, "{t},{},{},{}", dist.mean, dist.std, dist.samples.len())?;
    }
    Ok(())
}

/// Level-curve CSV: (confidence, t, a_star) for every curve point.
pub fn write_level_curves_csv(
    curves: &[ConfidenceCurve],
    w: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(w, "confidence,t,a_star")?;
    for curve in curves {
        for (t, a_star) in &curve.points {
            writeln!(w, "{},{t},{a_star}", curve.level)?;
        }
    }
    Ok(())
}

/// Datasheet CSV: one row per confidence level.
pub fn write_datasheet_csv(sheet: &Datasheet, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "confidence,target_accuracy,max_objects")?;
    for row in &sheet.rows {
        writeln!(w, "{},{},{}", row.level, sheet.target_accuracy, row.max_t)?;
    }
    Ok(())
}

/// Aligned text rendering of the datasheet.
pub fn datasheet_text(sheet: &Datasheet) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Maximum objects recognizable at accuracy {}\n",
        sheet.target_accuracy
    ));
    out.push_str("confidence  max objects\n");
    for row in &sheet.rows {
        out.push_str(&format!(
            "{:>9.0}%  {:>11}\n",
            row.level * 100.0,
            row.max_t
        ));
    }
    out
}
