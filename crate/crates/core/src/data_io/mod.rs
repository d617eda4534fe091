//! Datasets, train/validation splits and on-disk formats.

mod blobs;
mod checkpoint;
mod csv_table;
mod idx;
mod prototype_file;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blobs::{synthetic_blobs, BlobsReport, BlobsSpec};
pub use checkpoint::{write_metrics_jsonl, Checkpoint, EpochMetrics, LayerRecord, CHECKPOINT_SCHEMA_VERSION};
pub use csv_table::load_csv;
pub use idx::{load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use prototype_file::{format_f64, read_prototypes, write_prototypes};

/// Labelled feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
    name: String,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_count: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("dataset has no rows"));
        }
        if features.len() != labels.len() {
            return Err(Error::invalid(format!("{} feature rows but {} labels", features.len(), labels.len())));
        }
        let width = features[0].len();
        if width == 0 {
            return Err(Error::invalid("dataset rows have no features"));
        }
        if let Some(i) = features.iter().position(|r| r.len() != width) {
            return Err(Error::invalid(format!("row {i} has {} features, expected {width}", features[i].len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::invalid(format!("label {bad} is outside [0, {class_count})")));
        }
        Ok(Self { features, labels, class_count, name: name.into() })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features[0].len()
    }

    /// Classes in `[0, C)` with no examples.
    pub fn unseen_classes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.class_count];
        for &l in &self.labels {
            seen[l] = true;
        }
        (0..self.class_count).filter(|&c| !seen[c]).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<Dataset> {
        Dataset::new(
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_count,
            name,
        )
    }

    pub fn with_class_count(mut self, class_count: usize) -> Result<Self> {
        if class_count < self.class_count {
            return Err(Error::invalid(format!(
                "cannot shrink class count from {} to {class_count}",
                self.class_count
            )));
        }
        self.class_count = class_count;
        Ok(self)
    }

    pub fn map_features(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.features.iter().map(|r| f(r)).collect(),
            self.labels.clone(),
            self.class_count,
            self.name.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { validation_fraction: 0.2, seed: 0, stratified: true }
    }
}

/// Sorted `(train, validation)` row indices.
pub fn split_indices(data: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.validation_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::invalid(format!("validation fraction must lie in (0, 1), got {f}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut by_class = vec![Vec::new(); data.class_count()];
        for (i, &l) in data.labels().iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    } else {
        vec![(0..data.len()).collect()]
    };

    let mut train = Vec::with_capacity(data.len());
    let mut val = Vec::new();
    for mut group in groups {
        group.shuffle(&mut rng);
        let take = (f * group.len() as f64).round() as usize;
        val.extend_from_slice(&group[..take]);
        train.extend_from_slice(&group[take..]);
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid(format!(
            "validation fraction {f} leaves a split empty ({} train, {} validation rows)",
            train.len(),
            val.len()
        )));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, val) = split_indices(data, spec)?;
    Ok((data.subset(&train, format!("{}/train", data.name()))?, data.subset(&val, format!("{}/val", data.name()))?))
}

/// Per-feature affine standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Constant features keep a unit scale.
    pub fn fit(data: &Dataset) -> Self {
        let n = data.len() as f64;
        let dim = data.input_dim();
        let mut mean = vec![0.0; dim];
        for row in data.features() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for row in data.features() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.input_dim() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), actual: data.input_dim() });
        }
        data.map_features(|r| self.apply_row(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labelled(labels: Vec<usize>, classes: usize) -> Dataset {
        let features = labels.iter().enumerate().map(|(i, _)| vec![i as f64]).collect();
        Dataset::new(features, labels, classes, "t").unwrap()
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::new(vec![], vec![], 2, "e").is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1], 2, "r").is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![2], 2, "l").is_err());
        let d = labelled(vec![2, 2], 4);
        assert_eq!(d.unseen_classes(), vec![0, 1, 3]);
    }

    #[test]
    fn half_split() {
        let d = labelled((0..10).map(|i| i % 2).collect(), 2);
        let spec = SplitSpec { validation_fraction: 0.5, seed: 1, stratified: false };
        let (train, val) = split(&d, &spec).unwrap();
        assert_eq!((train.len(), val.len()), (5, 5));
        let again = split(&d, &spec).unwrap();
        assert_eq!(again.0, train);
    }

    #[test]
    fn stratified_split_is_balanced() {
        let d = labelled((0..22).map(|i| usize::from(i >= 11)).collect(), 2);
        let (train, val) = split(&d, &SplitSpec { validation_fraction: 0.3, seed: 2, stratified: true }).unwrap();
        for part in [&train, &val] {
            let ones = part.labels().iter().filter(|&&l| l == 1).count();
            let zeros = part.len() - ones;
            assert!((ones as i64 - zeros as i64).abs() <= 1, "{ones} vs {zeros}");
        }
        let val_ones = val.labels().iter().filter(|&&l| l == 1).count();
        assert!((val_ones as f64 - 0.3 * 11.0).abs() <= 1.0);
    }

    #[test]
    fn empty_split_rejected() {
        let d = labelled(vec![0, 1], 2);
        assert!(split(&d, &SplitSpec { validation_fraction: 0.1, seed: 0, stratified: false }).is_err());
        assert!(split(&d, &SplitSpec { validation_fraction: 1.0, seed: 0, stratified: false }).is_err());
    }

    #[test]
    fn standardizer_centers_training_data() {
        let d = Dataset::new(vec![vec![1.0, 5.0], vec![3.0, 5.0]], vec![0, 1], 2, "s").unwrap();
        let st = Standardizer::fit(&d);
        assert_eq!(st.mean, vec![2.0, 5.0]);
        assert_eq!(st.std, vec![1.0, 1.0]);
        let z = st.apply(&d).unwrap();
        assert_eq!(z.features(), &[vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            labels in proptest::collection::vec(0usize..4, 4..80),
            frac in 0.2f64..0.8,
            seed in 0u64..100,
            stratified in any::<bool>(),
        ) {
            let d = labelled(labels, 4);
            let spec = SplitSpec { validation_fraction: frac, seed, stratified };
            if let Ok((train, val)) = split_indices(&d, &spec) {
                let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
            }
        }
    }
}
