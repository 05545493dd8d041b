//! Dataset persistence and generator statistics.

mod common;

use relkit_core::dataset::{SelectFilter, Split};
use relkit_core::manifest::{load_dataset, save_dataset, FeatureEncoding};
use relkit_core::synth::{synth_generate, SynthSpec};

fn probe_spec() -> SynthSpec {
    SynthSpec {
        num_classes: 6,
        num_categories: 3,
        dim: 4,
        frames_per_session: 220,
        num_days: 2,
        noise_sigma: 1.0,
        day_drift_sigma: 0.0,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn synthetic_dataset_round_trips_in_both_encodings() {
    let spec = SynthSpec {
        num_classes: 4,
        num_categories: 2,
        dim: 6,
        frames_per_session: 12,
        num_days: 2,
        seed: 5,
        ..Default::default()
    };
    let ds = synth_generate(&spec).unwrap();
    for encoding in [FeatureEncoding::Csv, FeatureEncoding::Bin] {
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&ds, dir.path(), encoding).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_eq!(back, ds, "{encoding:?} round trip must be exact");
    }
}

/// Lag-1 autocorrelation of session residuals tracks temporal_rho.
#[test]
fn generator_autocorrelation_matches_rho() {
    for (rho, expect) in [(0.9f64, 0.9f64), (0.0, 0.0)] {
        let spec = SynthSpec {
            temporal_rho: rho,
            ..probe_spec()
        };
        let ds = synth_generate(&spec).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (_, range) in ds.session_ranges() {
            let frames = &ds.frames[range];
            let n = frames.len();
            for dim in 0..ds.dim {
                let mean: f64 =
                    frames.iter().map(|f| f.features[dim] as f64).sum::<f64>() / n as f64;
                let resid: Vec<f64> = frames
                    .iter()
                    .map(|f| f.features[dim] as f64 - mean)
                    .collect();
                for w in resid.windows(2) {
                    num += w[0] * w[1];
                }
                den += resid.iter().map(|r| r * r).sum::<f64>();
            }
        }
        let autocorr = num / den;
        assert!(
            (autocorr - expect).abs() < 0.05,
            "rho {rho}: measured lag-1 autocorrelation {autocorr}"
        );
    }
}

/// With day_drift_sigma = 0 the per-day class means coincide up to noise;
/// with drift they separate clearly.
#[test]
fn zero_drift_days_are_identically_distributed() {
    let day_gap = |spec: &SynthSpec| -> f64 {
        let ds = synth_generate(spec).unwrap();
        let mut worst = 0.0f64;
        for class in 0..ds.num_classes {
            let mut means = Vec::new();
            for day in 1..=spec.num_days {
                let frames: Vec<&relkit_core::FrameRecord> = ds
                    .frames
                    .iter()
                    .filter(|f| f.class_id == class && f.day == day)
                    .collect();
                let n = frames.len() as f64;
                let mean: Vec<f64> = (0..ds.dim)
                    .map(|j| {
                        frames.iter().map(|f| f.features[j] as f64).sum::<f64>() / n
                    })
                    .collect();
                means.push(mean);
            }
            for a in 0..means.len() {
                for b in a + 1..means.len() {
                    let dist2: f64 = means[a]
                        .iter()
                        .zip(means[b].iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    worst = worst.max((dist2 / ds.dim as f64).sqrt());
                }
            }
        }
        worst
    };
    // rho = 0 keeps the session means tight around mu.
    let still = day_gap(&SynthSpec {
        temporal_rho: 0.0,
        ..probe_spec()
    });
    let drifted = day_gap(&SynthSpec {
        temporal_rho: 0.0,
        day_drift_sigma: 0.5,
        ..probe_spec()
    });
    // 440 frames per (class, day) at sigma 1: the mean standard error per
    // dimension is ~0.048, so 0.2 is a comfortable noise floor.
    assert!(still < 0.2, "zero-drift day gap {still}");
    assert!(drifted > 2.0 * still, "drift {drifted} vs still {still}");
}

/// Zero-noise data is perfectly separated: a nearest-class-mean rule gets
/// 100%, and so does the fitted model.
#[test]
fn zero_noise_data_is_separable() {
    let spec = SynthSpec {
        noise_sigma: 0.0,
        temporal_rho: 0.0,
        num_classes: 6,
        num_categories: 3,
        dim: 16,
        frames_per_session: 8,
        num_days: 1,
        seed: 1,
        ..Default::default()
    };
    let ds = synth_generate(&spec).unwrap();
    let train = ds
        .select(&SelectFilter::split(Split::Train))
        .unwrap()
        .dataset;
    let test = ds.select(&SelectFilter::split(Split::Test)).unwrap().dataset;

    // Independent oracle: nearest class mean.
    let mut means = vec![vec![0.0f64; ds.dim]; ds.num_classes];
    let counts = train.class_counts();
    for frame in &train.frames {
        for (j, &v) in frame.features.iter().enumerate() {
            means[frame.class_id][j] += v as f64;
        }
    }
    for (class, mean) in means.iter_mut().enumerate() {
        for v in mean.iter_mut() {
            *v /= counts[class] as f64;
        }
    }
    let nearest = |features: &[f32]| -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (class, mean) in means.iter().enumerate() {
            let d: f64 = features
                .iter()
                .zip(mean.iter())
                .map(|(&x, &m)| (x as f64 - m) * (x as f64 - m))
                .sum();
            if d < best_d {
                best_d = d;
                best = class;
            }
        }
        best
    };
    assert!(test.frames.iter().all(|f| nearest(&f.features) == f.class_id));

    let model = relkit_core::RlsModel::fit_batch(
        train.features_f64().view(),
        &train.class_ids(),
        train.num_classes,
        1.0,
    )
    .unwrap();
    let result = relkit_core::evaluate(&model, &test).unwrap();
    assert_eq!(result.accuracy, 1.0);
}

#[test]
fn select_then_save_preserves_the_subset() {
    let ds = synth_generate(&SynthSpec {
        num_classes: 4,
        num_categories: 2,
        dim: 3,
        frames_per_session: 5,
        num_days: 2,
        seed: 9,
        ..Default::default()
    })
    .unwrap();
    let sel = ds
        .select(
            &SelectFilter::default()
                .with_classes(vec![1, 3])
                .with_days(vec![2]),
        )
        .unwrap();
    assert_eq!(sel.class_map, vec![1, 3]);
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&sel.dataset, dir.path(), FeatureEncoding::Bin).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back, sel.dataset);
    assert_eq!(back.num_classes, 2);
}
