//! Command implementations: resolve effective parameters, echo the config,
//! run, and write reports into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use relkit_core::dataset::{FeatureDataset, SelectFilter, Split};
use relkit_core::error::{Error, Result};
use relkit_core::eval::{
    cross_matrix, evaluate, incremental_curve, write_cross_matrix_csv, write_learning_curve_csv,
    CrossCondition,
};
use relkit_core::manifest::{load_dataset, save_dataset, FeatureEncoding};
use relkit_core::model::RlsModel;
use relkit_core::reliability::{
    accuracy_distributions, datasheet, datasheet_text, level_curve, write_datasheet_csv,
    write_distribution_csv, write_distribution_summary_csv, write_level_curves_csv,
    AccuracyDistribution, ConfidenceCurve, CurvePlan,
};
use relkit_core::synth::{synth_generate, SynthSpec};
use relkit_core::temporal::{
    filter_sweep, filtered_accuracy_distributions, write_sweep_csv, FilterConfig, PredictionTrace,
};

use crate::config::{
    CommandConfig, DatasheetParams, EvalParams, FilterParams, IncrementalParams,
    ReliabilityParams, RunConfig, Selection, SynthParams, TrainParams, XmatrixParams,
};

pub fn execute(mut config: RunConfig) -> Result<()> {
    let command = config.command.clone();
    match &command {
        CommandConfig::Synth(p) => cmd_synth(&mut config, p),
        CommandConfig::Train(p) => cmd_train(&mut config, p),
        CommandConfig::Eval(p) => cmd_eval(&mut config, p),
        CommandConfig::Xmatrix(p) => cmd_xmatrix(&mut config, p),
        CommandConfig::Incremental(p) => cmd_incremental(&mut config, p),
        CommandConfig::Reliability(p) => cmd_reliability(&mut config, p),
        CommandConfig::Filter(p) => cmd_filter(&mut config, p),
        CommandConfig::Datasheet(p) => cmd_datasheet(&mut config, p),
    }
}

fn write_report<F>(dir: &Path, name: &str, fill: F) -> Result<PathBuf>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let mut buf = Vec::new();
    fill(&mut buf).map_err(|e| Error::io(&path, e))?;
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn parse_split(s: &str) -> Result<Split> {
    s.parse()
}

/// Turn the CLI selection into a core filter, with a per-command default
/// split when the user gave none.
fn to_filter(sel: &Selection, default_split: Option<Split>) -> Result<SelectFilter> {
    let mut filter = SelectFilter {
        days: sel.days.clone(),
        variant: sel.variant.clone(),
        class_subset: sel.classes.clone(),
        first_k_per_class: sel.first_k,
        split: default_split,
    };
    if let Some(s) = &sel.split {
        filter.split = Some(parse_split(s)?);
    }
    Ok(filter)
}

fn apply_selection(
    ds: &FeatureDataset,
    sel: &Selection,
    default_split: Option<Split>,
) -> Result<FeatureDataset> {
    Ok(ds.select(&to_filter(sel, default_split)?)?.dataset)
}

fn fit(ds: &FeatureDataset, lambda: f64) -> Result<RlsModel> {
    RlsModel::fit_batch(
        ds.features_f64().view(),
        &ds.class_ids(),
        ds.num_classes,
        lambda,
    )
}

/// Train/test pair for one selection: same days/variant/classes, opposite
/// splits. `first_k` restricts only the training side.
fn train_test_pair(
    ds: &FeatureDataset,
    sel: &Selection,
) -> Result<(FeatureDataset, FeatureDataset)> {
    let mut train_sel = sel.clone();
    train_sel.split = Some("train".into());
    let mut test_sel = sel.clone();
    test_sel.split = Some("test".into());
    test_sel.first_k = None;
    Ok((
        apply_selection(ds, &train_sel, None)?,
        apply_selection(ds, &test_sel, None)?,
    ))
}

fn percents_to_fractions(levels: &[f64]) -> Result<Vec<f64>> {
    levels
        .iter()
        .map(|&p| {
            if p > 0.0 && p <= 100.0 {
                Ok(p / 100.0)
            } else {
                Err(Error::invalid_argument(format!(
                    "confidence level {p} must be in (0, 100]"
                )))
            }
        })
        .collect()
}

fn cmd_synth(config: &mut RunConfig, params: &SynthParams) -> Result<()> {
    config.write_echo()?;
    let encoding: FeatureEncoding = params.encoding.parse()?;
    let spec = SynthSpec {
        name: params.name.clone(),
        num_classes: params.num_classes,
        num_categories: params.num_categories,
        dim: params.dim,
        frames_per_session: params.frames_per_session,
        num_days: params.num_days,
        class_separation: params.class_separation,
        within_category_shrink: params.within_category_shrink,
        noise_sigma: params.noise_sigma,
        temporal_rho: params.temporal_rho,
        day_drift_sigma: params.day_drift_sigma,
        seed: config.global.seed,
    };
    let ds = synth_generate(&spec)?;
    let manifest = save_dataset(&ds, &config.global.out_dir, encoding)?;
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_train(config: &mut RunConfig, params: &TrainParams) -> Result<()> {
    config.write_echo()?;
    let ds = load_dataset(&params.manifest)?;
    let train = apply_selection(&ds, &params.selection, Some(Split::Train))?;
    let model = fit(&train, config.global.lambda)?;
    let path = config.global.out_dir.join("model.rls");
    model.save_checkpoint(&path)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_eval(config: &mut RunConfig, params: &EvalParams) -> Result<()> {
    config.write_echo()?;
    let model = RlsModel::load_checkpoint(&params.checkpoint)?;
    let ds = load_dataset(&params.manifest)?;
    let test = apply_selection(&ds, &params.selection, Some(Split::Test))?;
    let result = evaluate(&model, &test)?;
    let mut json = serde_json::to_string_pretty(&result)
        .map_err(|e| Error::invalid_data(format!("result serialization failed: {e}")))?;
    json.push('\n');
    let path = config.global.out_dir.join("eval.json");
    fs::write(&path, &json).map_err(|e| Error::io(&path, e))?;
    print!("{json}");
    Ok(())
}

fn cmd_xmatrix(config: &mut RunConfig, params: &XmatrixParams) -> Result<()> {
    config.write_echo()?;
    let ds = load_dataset(&params.manifest)?;
    // Days/variant/classes narrow the pool; the condition axis then slices it.
    let mut pool_sel = params.selection.clone();
    pool_sel.split = None;
    pool_sel.first_k = None;
    let pool = apply_selection(&ds, &pool_sel, None)?;

    let mut conditions = Vec::new();
    match params.by.as_str() {
        "days" => {
            let mut days: Vec<u32> = pool.frames.iter().map(|f| f.day).collect();
            days.sort_unstable();
            days.dedup();
            for day in days {
                let base = SelectFilter::default().with_days(vec![day]);
                let train = pool
                    .select(&SelectFilter {
                        split: Some(Split::Train),
                        ..base.clone()
                    })?
                    .dataset;
                let test = pool
                    .select(&SelectFilter {
                        split: Some(Split::Test),
                        ..base
                    })?
                    .dataset;
                conditions.push(CrossCondition {
                    tag: format!("day{day}"),
                    train,
                    test,
                });
            }
        }
        "variant" => {
            let mut variants: Vec<String> =
                pool.frames.iter().map(|f| f.variant.clone()).collect();
            variants.sort();
            variants.dedup();
            for variant in variants {
                let base = SelectFilter::default().with_variant(variant.clone());
                let train = pool
                    .select(&SelectFilter {
                        split: Some(Split::Train),
                        ..base.clone()
                    })?
                    .dataset;
                let test = pool
                    .select(&SelectFilter {
                        split: Some(Split::Test),
                        ..base
                    })?
                    .dataset;
                conditions.push(CrossCondition {
                    tag: variant,
                    train,
                    test,
                });
            }
        }
        other => {
            return Err(Error::invalid_argument(format!(
                "unknown condition axis '{other}' (expected days|variant)"
            )))
        }
    }
    let matrix = cross_matrix(&conditions, config.global.lambda, params.budget)?;
    let path = write_report(&config.global.out_dir, "xmatrix.csv", |w| {
        write_cross_matrix_csv(&matrix, w)
    })?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_incremental(config: &mut RunConfig, params: &IncrementalParams) -> Result<()> {
    config.write_echo()?;
    let ds = load_dataset(&params.manifest)?;
    let mut sources = Vec::new();
    for &day in &params.train_days {
        let mut sel = params.selection.clone();
        sel.days = Some(vec![day]);
        sel.split = Some("train".into());
        let mut src = apply_selection(&ds, &sel, None)?;
        src.name = format!("day{day}");
        sources.push(src);
    }
    let mut test_sel = params.selection.clone();
    test_sel.days = Some(params.test_days.clone());
    test_sel.split = Some("test".into());
    test_sel.first_k = None;
    let test = apply_selection(&ds, &test_sel, None)?;
    let curve = incremental_curve(&sources, &test, params.step, config.global.lambda)?;
    let path = write_report(&config.global.out_dir, "curve.csv", |w| {
        write_learning_curve_csv(&curve, w)
    })?;
    println!("{}", path.display());
    Ok(())
}

/// Resolve the t range against the (class-filtered) vocabulary: default is
/// 2 ..= T−2.
fn resolve_t_range(
    t_min: Option<usize>,
    t_max: Option<usize>,
    num_classes: usize,
) -> Result<(usize, usize)> {
    let t_min = t_min.unwrap_or(2);
    let t_max = t_max.unwrap_or_else(|| num_classes.saturating_sub(2).max(2));
    if t_max > num_classes {
        return Err(Error::invalid_argument(format!(
            "t_max {t_max} exceeds the {num_classes}-class vocabulary"
        )));
    }
    Ok((t_min, t_max))
}

fn distributions_for(
    train: &FeatureDataset,
    test: &FeatureDataset,
    plan: &CurvePlan,
    filter_window: usize,
    lambda: f64,
) -> Result<std::collections::BTreeMap<usize, AccuracyDistribution>> {
    if filter_window <= 1 {
        accuracy_distributions(train, test, plan, lambda)
    } else {
        filtered_accuracy_distributions(
            train,
            test,
            plan,
            &FilterConfig::with_window(filter_window),
            lambda,
        )
    }
}

fn cmd_reliability(config: &mut RunConfig, params: &ReliabilityParams) -> Result<()> {
    let ds = load_dataset(&params.manifest)?;
    let (train, test) = train_test_pair(&ds, &params.selection)?;
    let (t_min, t_max) =
        resolve_t_range(Some(params.t_min), params.t_max, train.num_classes)?;
    let mut resolved = params.clone();
    resolved.t_max = Some(t_max);
    config.command = CommandConfig::Reliability(resolved.clone());
    config.write_echo()?;

    let plan = CurvePlan::over_range(t_min, t_max, resolved.trials, config.global.seed)?;
    let dists = distributions_for(
        &train,
        &test,
        &plan,
        resolved.filter_window,
        config.global.lambda,
    )?;
    let fractions = percents_to_fractions(&resolved.levels)?;
    let curves: Vec<ConfidenceCurve> = fractions
        .iter()
        .map(|&level| level_curve(&dists, level))
        .collect::<Result<_>>()?;

    let dir = config.global.out_dir.clone();
    write_report(&dir, "dist.csv", |w| write_distribution_csv(&dists, w))?;
    write_report(&dir, "dist_summary.csv", |w| {
        write_distribution_summary_csv(&dists, w)
    })?;
    let path = write_report(&dir, "level_curves.csv", |w| {
        write_level_curves_csv(&curves, w)
    })?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_filter(config: &mut RunConfig, params: &FilterParams) -> Result<()> {
    config.write_echo()?;
    let ds = load_dataset(&params.manifest)?;
    let (train, test) = train_test_pair(&ds, &params.selection)?;
    let model = match &params.checkpoint {
        Some(path) => RlsModel::load_checkpoint(path)?,
        None => fit(&train, config.global.lambda)?,
    };
    let trace = PredictionTrace::from_model(&model, &test)?;
    let rows = filter_sweep(&trace, &params.windows, params.frame_period)?;
    let path = write_report(&config.global.out_dir, "sweep.csv", |w| {
        write_sweep_csv(&rows, w)
    })?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_datasheet(config: &mut RunConfig, params: &DatasheetParams) -> Result<()> {
    let ds = load_dataset(&params.manifest)?;
    let (train, test) = train_test_pair(&ds, &params.selection)?;
    let (t_min, t_max) =
        resolve_t_range(Some(params.t_min), params.t_max, train.num_classes)?;
    let mut resolved = params.clone();
    resolved.t_max = Some(t_max);
    config.command = CommandConfig::Datasheet(resolved.clone());
    config.write_echo()?;

    let plan = CurvePlan::over_range(t_min, t_max, resolved.trials, config.global.seed)?;
    let dists = distributions_for(
        &train,
        &test,
        &plan,
        resolved.filter_window,
        config.global.lambda,
    )?;
    let fractions = percents_to_fractions(&resolved.levels)?;
    let sheet = datasheet(&dists, &fractions, resolved.target_acc)?;

    let dir = config.global.out_dir.clone();
    write_report(&dir, "datasheet.csv", |w| write_datasheet_csv(&sheet, w))?;
    let text = datasheet_text(&sheet);
    let txt_path = dir.join("datasheet.txt");
    fs::write(&txt_path, &text).map_err(|e| Error::io(&txt_path, e))?;
    print!("{text}");
    Ok(())
}
