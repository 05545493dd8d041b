//! Labeled feature-vector datasets with session structure.
//!
//! A dataset is an ordered list of frames, each carrying its features plus
//! the acquisition metadata (object, category, day, train/test split,
//! variant tag, position within its session). Frames belonging to one
//! session are contiguous and ordered by `session_seq`.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train/test split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid_argument(format!(
                "unknown split '{other}' (expected train|test)"
            ))),
        }
    }
}

/// One acquired frame: feature vector plus session metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub features: Vec<f32>,
    pub class_id: usize,
    pub object_name: String,
    pub category_name: String,
    pub day: u32,
    pub split: Split,
    /// Frame index within its acquisition session.
    pub session_seq: u32,
    /// Condition tag, e.g. a crop variant.
    pub variant: String,
}

impl FrameRecord {
    /// Key identifying the session this frame belongs to.
    pub fn session_key(&self) -> String {
        format!(
            "{}|day{}|{}|{}",
            self.object_name, self.day, self.split, self.variant
        )
    }
}

/// An ordered, immutable collection of frames with a fixed class vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub name: String,
    pub dim: usize,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    /// Category name per class, aligned with `class_names`.
    pub categories: Vec<String>,
    pub frames: Vec<FrameRecord>,
}

/// Frame filter for [`FeatureDataset::select`]. `None` fields match everything.
#[derive(Debug, Clone, Default)]
pub struct SelectFilter {
    pub days: Option<Vec<u32>>,
    pub split: Option<Split>,
    pub variant: Option<String>,
    /// Original class ids to keep; the result is re-indexed densely.
    pub class_subset: Option<Vec<usize>>,
    /// Keep only the first k matching frames of every class.
    pub first_k_per_class: Option<usize>,
}

impl SelectFilter {
    pub fn split(split: Split) -> Self {
        SelectFilter {
            split: Some(split),
            ..Default::default()
        }
    }

    pub fn with_days(mut self, days: Vec<u32>) -> Self {
        self.days = Some(days);
        self
    }

    pub fn with_classes(mut self, classes: Vec<usize>) -> Self {
        self.class_subset = Some(classes);
        self
    }

    pub fn with_first_k(mut self, k: usize) -> Self {
        self.first_k_per_class = Some(k);
        self
    }

    pub fn with_variant(mut self, variant: impl Into<String>) -> Self {
        self.variant = Some(variant.into());
        self
    }
}

/// Result of a selection: the sub-dataset plus the class id mapping.
#[derive(Debug, Clone)]
pub struct Selected {
    pub dataset: FeatureDataset,
    /// `class_map[new_id]` is the original class id. Identity when the
    /// filter had no class subset.
    pub class_map: Vec<usize>,
}

/// Per-dimension affine transform captured by [`FeatureDataset::standardize`].
#[derive(Debug, Clone)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureDataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// All features as an n×d f64 matrix, in frame order.
    pub fn features_f64(&self) -> Array2<f64> {
        let n = self.frames.len();
        let mut x = Array2::<f64>::zeros((n, self.dim));
        for (i, frame) in self.frames.iter().enumerate() {
            for (j, &v) in frame.features.iter().enumerate() {
                x[(i, j)] = v as f64;
            }
        }
        x
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.class_id).collect()
    }

    /// Number of frames per class, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for frame in &self.frames {
            counts[frame.class_id] += 1;
        }
        counts
    }

    /// Structural validation: id ranges, feature widths, finiteness, and
    /// strictly increasing `session_seq` within each contiguous session.
    pub fn validate(&self) -> Result<()> {
        if self.class_names.len() != self.num_classes {
            return Err(Error::invalid_data(format!(
                "dataset '{}': {} class names for {} classes",
                self.name,
                self.class_names.len(),
                self.num_classes
            )));
        }
        if self.categories.len() != self.num_classes {
            return Err(Error::invalid_data(format!(
                "dataset '{}': {} category entries for {} classes",
                self.name,
                self.categories.len(),
                self.num_classes
            )));
        }
        let mut prev_key: Option<(String, u32)> = None;
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.class_id >= self.num_classes {
                return Err(Error::invalid_data(format!(
                    "frame {i}: class id {} out of range ({} classes)",
                    frame.class_id, self.num_classes
                )));
            }
            if frame.features.len() != self.dim {
                return Err(Error::invalid_data(format!(
                    "frame {i}: {} features, expected {}",
                    frame.features.len(),
                    self.dim
                )));
            }
            if frame.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid_data(format!(
                    "frame {i}: non-finite feature value"
                )));
            }
            if frame.day < 1 {
                return Err(Error::invalid_data(format!("frame {i}: day must be >= 1")));
            }
            let key = frame.session_key();
            match &prev_key {
                Some((k, seq)) if *k == key => {
                    if frame.session_seq <= *seq {
                        return Err(Error::invalid_data(format!(
                            "frame {i}: session_seq {} not increasing within session {key}",
                            frame.session_seq
                        )));
                    }
                }
                _ => {}
            }
            prev_key = Some((key, frame.session_seq));
        }
        Ok(())
    }

    /// Order-preserving filtered sub-dataset.
    ///
    /// With a class subset the surviving classes are re-indexed densely in
    /// ascending original-id order; the returned map records the mapping.
    pub fn select(&self, filter: &SelectFilter) -> Result<Selected> {
        if let Some(k) = filter.first_k_per_class {
            if k < 1 {
                return Err(Error::invalid_argument("first_k_per_class must be >= 1"));
            }
        }
        let class_map: Vec<usize> = match &filter.class_subset {
            Some(subset) => {
                if subset.is_empty() {
                    return Err(Error::invalid_argument("class subset is empty"));
                }
                let mut ids: Vec<usize> = subset.clone();
                ids.sort_unstable();
                ids.dedup();
                if ids.len() != subset.len() {
                    return Err(Error::invalid_argument("class subset contains duplicates"));
                }
                if let Some(&bad) = ids.iter().find(|&&c| c >= self.num_classes) {
                    return Err(Error::invalid_argument(format!(
                        "class id {bad} out of range ({} classes)",
                        self.num_classes
                    )));
                }
                ids
            }
            None => (0..self.num_classes).collect(),
        };
        let mut new_id = vec![usize::MAX; self.num_classes];
        for (new, &orig) in class_map.iter().enumerate() {
            new_id[orig] = new;
        }

        let mut taken_per_class = vec![0usize; class_map.len()];
        let mut frames = Vec::new();
        for frame in &self.frames {
            if let Some(days) = &filter.days {
                if !days.contains(&frame.day) {
                    continue;
                }
            }
            if let Some(split) = filter.split {
                if frame.split != split {
                    continue;
                }
            }
            if let Some(variant) = &filter.variant {
                if frame.variant != *variant {
                    continue;
                }
            }
            let mapped = new_id[frame.class_id];
            if mapped == usize::MAX {
                continue;
            }
            if let Some(k) = filter.first_k_per_class {
                if taken_per_class[mapped] >= k {
                    continue;
                }
            }
            taken_per_class[mapped] += 1;
            let mut kept = frame.clone();
            kept.class_id = mapped;
            frames.push(kept);
        }
        if frames.is_empty() {
            return Err(Error::EmptySelection(format!(
                "no frames of '{}' match the filter",
                self.name
            )));
        }
        let dataset = FeatureDataset {
            name: self.name.clone(),
            dim: self.dim,
            num_classes: class_map.len(),
            class_names: class_map
                .iter()
                .map(|&c| self.class_names[c].clone())
                .collect(),
            categories: class_map
                .iter()
                .map(|&c| self.categories[c].clone())
                .collect(),
            frames,
        };
        Ok(Selected { dataset, class_map })
    }

    /// Per-dimension standardization to zero mean and unit variance.
    ///
    /// Optional preprocessing; nothing in the toolkit applies it implicitly.
    /// Constant dimensions are left unscaled.
    pub fn standardize(&self) -> Result<(FeatureDataset, Standardization)> {
        if self.is_empty() {
            return Err(Error::invalid_argument("cannot standardize an empty dataset"));
        }
        let n = self.frames.len() as f64;
        let mut mean = vec![0.0f64; self.dim];
        for frame in &self.frames {
            for (j, &v) in frame.features.iter().enumerate() {
                mean[j] += v as f64;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0f64; self.dim];
        for frame in &self.frames {
            for (j, &v) in frame.features.iter().enumerate() {
                let d = v as f64 - mean[j];
                var[j] += d * d;
            }
        }
        let std: Vec<f64> = var
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let mut out = self.clone();
        for frame in out.frames.iter_mut() {
            for (j, v) in frame.features.iter_mut().enumerate() {
                *v = ((*v as f64 - mean[j]) / std[j]) as f32;
            }
        }
        Ok((out, Standardization { mean, std }))
    }

    /// Frames grouped by class id, preserving order within each class.
    pub fn frames_by_class(&self) -> Vec<Vec<&FrameRecord>> {
        let mut by_class: Vec<Vec<&FrameRecord>> = vec![Vec::new(); self.num_classes];
        for frame in &self.frames {
            by_class[frame.class_id].push(frame);
        }
        by_class
    }

    /// True when both datasets agree on dim, class count and class names.
    pub fn same_vocabulary(&self, other: &FeatureDataset) -> bool {
        self.dim == other.dim
            && self.num_classes == other.num_classes
            && self.class_names == other.class_names
    }

    /// Map of session key to the frame index range of each contiguous session.
    pub fn session_ranges(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out: Vec<(String, std::ops::Range<usize>)> = Vec::new();
        for (i, frame) in self.frames.iter().enumerate() {
            let key = frame.session_key();
            match out.last_mut() {
                Some((k, range)) if *k == key => range.end = i + 1,
                _ => out.push((key, i..i + 1)),
            }
        }
        out
    }

    /// Per-class frame counts keyed by class name, for error messages.
    pub fn count_by_name(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for frame in &self.frames {
            *counts
                .entry(self.class_names[frame.class_id].as_str())
                .or_insert(0) += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> FeatureDataset {
        let mut frames = Vec::new();
        for class in 0..3usize {
            for day in 1..=2u32 {
                for seq in 0..4u32 {
                    frames.push(FrameRecord {
                        features: vec![class as f32, day as f32 + seq as f32],
                        class_id: class,
                        object_name: format!("obj{class}"),
                        category_name: format!("cat{}", class / 2),
                        day,
                        split: Split::Train,
                        session_seq: seq,
                        variant: "default".into(),
                    });
                }
            }
        }
        FeatureDataset {
            name: "tiny".into(),
            dim: 2,
            num_classes: 3,
            class_names: vec!["obj0".into(), "obj1".into(), "obj2".into()],
            categories: vec!["cat0".into(), "cat0".into(), "cat1".into()],
            frames,
        }
    }

    #[test]
    fn empty_filter_is_identity() {
        let ds = tiny_dataset();
        let sel = ds.select(&SelectFilter::default()).unwrap();
        assert_eq!(sel.dataset, ds);
        assert_eq!(sel.class_map, vec![0, 1, 2]);
    }

    #[test]
    fn first_k_keeps_the_earliest_frames() {
        let ds = tiny_dataset();
        let sel = ds
            .select(&SelectFilter::default().with_classes(vec![0, 1]).with_first_k(1))
            .unwrap();
        assert_eq!(sel.dataset.len(), 2);
        assert!(sel
            .dataset
            .frames
            .iter()
            .all(|f| f.day == 1 && f.session_seq == 0));
    }

    #[test]
    fn class_subset_reindexes_densely() {
        let ds = tiny_dataset();
        let sel = ds
            .select(&SelectFilter::default().with_classes(vec![2, 0]))
            .unwrap();
        assert_eq!(sel.class_map, vec![0, 2]);
        assert_eq!(sel.dataset.num_classes, 2);
        assert_eq!(sel.dataset.class_names, vec!["obj0", "obj2"]);
        assert!(sel.dataset.frames.iter().all(|f| f.class_id < 2));
        // Original class 2 became dense id 1.
        assert!(sel
            .dataset
            .frames
            .iter()
            .filter(|f| f.object_name == "obj2")
            .all(|f| f.class_id == 1));
    }

    #[test]
    fn empty_selection_is_an_error() {
        let ds = tiny_dataset();
        let err = ds
            .select(&SelectFilter::default().with_days(vec![9]))
            .unwrap_err();
        assert!(matches!(err, Error::EmptySelection(_)));
    }

    #[test]
    fn selection_composes_with_conjunction() {
        let ds = tiny_dataset();
        let f1 = SelectFilter::default().with_days(vec![1]);
        let f2 = SelectFilter::default().with_classes(vec![0, 2]);
        let chained = ds
            .select(&f1)
            .unwrap()
            .dataset
            .select(&f2)
            .unwrap()
            .dataset;
        let combined = ds
            .select(&SelectFilter::default().with_days(vec![1]).with_classes(vec![0, 2]))
            .unwrap()
            .dataset;
        assert_eq!(chained, combined);
    }

    #[test]
    fn validate_catches_bad_frames() {
        let mut ds = tiny_dataset();
        ds.frames[0].features[0] = f32::NAN;
        assert!(matches!(ds.validate(), Err(Error::InvalidData(_))));

        let mut ds = tiny_dataset();
        ds.frames[0].class_id = 99;
        assert!(matches!(ds.validate(), Err(Error::InvalidData(_))));

        let mut ds = tiny_dataset();
        ds.frames[1].session_seq = 0; // duplicate of frame 0's seq
        assert!(matches!(ds.validate(), Err(Error::InvalidData(_))));
    }

    #[test]
    fn standardize_centers_each_dimension() {
        let ds = tiny_dataset();
        let (std_ds, params) = ds.standardize().unwrap();
        let n = std_ds.len() as f64;
        for j in 0..ds.dim {
            let mean: f64 = std_ds
                .frames
                .iter()
                .map(|f| f.features[j] as f64)
                .sum::<f64>()
                / n;
            assert!(mean.abs() < 1e-5);
        }
        assert_eq!(params.mean.len(), 2);
    }

    #[test]
    fn session_ranges_cover_all_frames() {
        let ds = tiny_dataset();
        let ranges = ds.session_ranges();
        assert_eq!(ranges.len(), 6); // 3 classes x 2 days
        let total: usize = ranges.iter().map(|(_, r)| r.len()).sum();
        assert_eq!(total, ds.len());
    }
}
