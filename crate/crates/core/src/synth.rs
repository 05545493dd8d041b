//! Synthetic acquisition sessions: category-clustered Gaussian classes,
//! AR(1)-correlated frames, and per-day drift of the class means.
//!
//! The generator is a desk-scale stand-in for a multi-day robot acquisition
//! protocol: T objects in evenly sized categories, one train and one test
//! session of `frames_per_session` frames per object per day. It reproduces
//! the three phenomena the experiments probe: confusable classes (categories
//! cluster their members), temporally correlated frames, and cross-day
//! distribution shift.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{FeatureDataset, FrameRecord, Split};
use crate::error::{Error, Result};

/// Generator parameters. Defaults mirror a four-day, 28-object protocol
/// with 220 frames per session, at a desk-scale feature width of 256.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub name: String,
    pub num_classes: usize,
    /// Must divide `num_classes`; classes are assigned contiguously.
    pub num_categories: usize,
    pub dim: usize,
    pub frames_per_session: usize,
    pub num_days: u32,
    /// Scale of category anchors and class offsets.
    pub class_separation: f64,
    /// In (0,1]; smaller values pull a category's classes together.
    pub within_category_shrink: f64,
    /// Per-dimension noise std; 0 yields frames exactly on the class means.
    pub noise_sigma: f64,
    /// AR(1) coefficient of consecutive frames, in [0,1).
    pub temporal_rho: f64,
    /// Std of the per-(class, day) mean shift; 0 makes days identically
    /// distributed.
    pub day_drift_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            name: "synth".into(),
            num_classes: 28,
            num_categories: 7,
            dim: 256,
            frames_per_session: 220,
            num_days: 4,
            class_separation: 1.0,
            within_category_shrink: 0.5,
            noise_sigma: 4.0,
            temporal_rho: 0.8,
            day_drift_sigma: 0.4,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid_argument("num_classes must be >= 2"));
        }
        if self.num_categories < 1 || self.num_classes % self.num_categories != 0 {
            return Err(Error::invalid_argument(
                "num_categories must divide num_classes",
            ));
        }
        if self.dim < 1 {
            return Err(Error::invalid_argument("dim must be >= 1"));
        }
        if self.frames_per_session < 1 {
            return Err(Error::invalid_argument("frames_per_session must be >= 1"));
        }
        if self.num_days < 1 {
            return Err(Error::invalid_argument("num_days must be >= 1"));
        }
        if !(self.class_separation > 0.0) {
            return Err(Error::invalid_argument("class_separation must be positive"));
        }
        if !(self.within_category_shrink > 0.0 && self.within_category_shrink <= 1.0) {
            return Err(Error::invalid_argument(
                "within_category_shrink must be in (0, 1]",
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid_argument("noise_sigma must be >= 0"));
        }
        if !(self.temporal_rho >= 0.0 && self.temporal_rho < 1.0) {
            return Err(Error::invalid_argument("temporal_rho must be in [0, 1)"));
        }
        if !(self.day_drift_sigma >= 0.0) || !self.day_drift_sigma.is_finite() {
            return Err(Error::invalid_argument("day_drift_sigma must be >= 0"));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * scale
        })
        .collect()
}

/// Generate a dataset from the spec. Deterministic for a fixed seed.
///
/// Class means are `anchor(category) + shrink · offset(class)`. Each
/// (class, day) pair gets a drift shift shared by its train and test
/// sessions. Within a session, frame t is `μ + ε_t` with
/// `ε_0 = η_0` and `ε_t = ρ·ε_{t−1} + √(1−ρ²)·η_t`, `η_t ~ N(0, σ²I)`,
/// so every frame has marginal std σ per dimension.
pub fn synth_generate(spec: &SynthSpec) -> Result<FeatureDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t = spec.num_classes;
    let d = spec.dim;
    let per_category = t / spec.num_categories;

    let anchors: Vec<Vec<f64>> = (0..spec.num_categories)
        .map(|_| gaussian_vec(&mut rng, d, spec.class_separation))
        .collect();
    let offsets: Vec<Vec<f64>> = (0..t)
        .map(|_| gaussian_vec(&mut rng, d, spec.class_separation))
        .collect();
    let means: Vec<Vec<f64>> = (0..t)
        .map(|class| {
            let anchor = &anchors[class / per_category];
            (0..d)
                .map(|j| anchor[j] + spec.within_category_shrink * offsets[class][j])
                .collect()
        })
        .collect();

    // Drift is drawn per (class, day) and shared by both splits of that day.
    let mut shifts: Vec<Vec<Vec<f64>>> = Vec::with_capacity(t);
    for _ in 0..t {
        let per_day: Vec<Vec<f64>> = (0..spec.num_days)
            .map(|_| gaussian_vec(&mut rng, d, spec.day_drift_sigma))
            .collect();
        shifts.push(per_day);
    }

    let name_width = ((t - 1).max(1) as f64).log10().floor() as usize + 1;
    let name_width = name_width.max(2);
    let class_names: Vec<String> = (0..t)
        .map(|c| format!("obj{c:0name_width$}"))
        .collect();
    let categories: Vec<String> = (0..t)
        .map(|c| format!("cat{}", c / per_category))
        .collect();

    let decay = (1.0 - spec.temporal_rho * spec.temporal_rho).sqrt();
    let mut frames = Vec::with_capacity(t * spec.num_days as usize * 2 * spec.frames_per_session);
    for class in 0..t {
        for day in 1..=spec.num_days {
            for split in [Split::Train, Split::Test] {
                let mu: Vec<f64> = (0..d)
                    .map(|j| means[class][j] + shifts[class][(day - 1) as usize][j])
                    .collect();
                let mut eps = vec![0.0f64; d];
                for seq in 0..spec.frames_per_session {
                    for (j, e) in eps.iter_mut().enumerate() {
                        let eta: f64 =
                            rng.sample::<f64, _>(StandardNormal) * spec.noise_sigma;
                        *e = if seq == 0 {
                            eta
                        } else {
                            spec.temporal_rho * *e + decay * eta
                        };
                        let _ = j;
                    }
                    let features: Vec<f32> = (0..d)
                        .map(|j| (mu[j] + eps[j]) as f32)
                        .collect();
                    frames.push(FrameRecord {
                        features,
                        class_id: class,
                        object_name: class_names[class].clone(),
                        category_name: categories[class].clone(),
                        day,
                        split,
                        session_seq: seq as u32,
                        variant: "default".into(),
                    });
                }
            }
        }
    }

    let dataset = FeatureDataset {
        name: spec.name.clone(),
        dim: d,
        num_classes: t,
        class_names,
        categories,
        frames,
    };
    dataset.validate()?;
    Ok(dataset)
}
