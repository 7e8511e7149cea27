//! Synthetic imbalanced Gaussian-cluster classification data.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::EnvError;
use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub num_classes: usize,
    pub class_counts: Vec<usize>,
    pub feature_dim: usize,
    /// Minimum distance between any two class means.
    pub class_separation: Real,
    pub noise_sigma: Real,
    pub seed: u64,
}

impl DatasetSpec {
    /// Ten classes with counts spaced geometrically from 80 to 827.
    pub fn imbalanced_default(seed: u64) -> Self {
        let num_classes = 10;
        let ratio: Real = 827.0 / 80.0;
        let class_counts = (0..num_classes)
            .map(|k| (80.0 * ratio.powf(k as Real / (num_classes - 1) as Real)).round() as usize)
            .collect();
        Self {
            num_classes,
            class_counts,
            feature_dim: 16,
            class_separation: 2.0,
            noise_sigma: 1.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::Config(msg));
        if self.num_classes == 0 || self.feature_dim == 0 {
            return bad("num_classes and feature_dim must be positive".into());
        }
        if self.class_counts.len() != self.num_classes {
            return bad(format!(
                "{} class counts for {} classes",
                self.class_counts.len(),
                self.num_classes
            ));
        }
        if self.class_counts.contains(&0) {
            return bad("every class needs at least one example".into());
        }
        if !(self.class_separation > 0.0) || !(self.noise_sigma > 0.0) {
            return bad("class_separation and noise_sigma must be positive".into());
        }
        // Means sit on signed coordinate axes, so at most 2·d can be placed.
        if self.num_classes > 2 * self.feature_dim {
            return bad(format!(
                "feature_dim {} too small to separate {} class means",
                self.feature_dim, self.num_classes
            ));
        }
        Ok(())
    }
}

/// Labelled examples plus a stratified 70/15/15 train/val/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub features: Vec<Vec<Real>>,
    pub labels: Vec<usize>,
    pub class_means: Vec<Vec<Real>>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Writes `f0,…,f{d−1},label` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.feature_dim).map(|k| format!("f{k}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.push(y.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> csv::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, EnvError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.feature_dim;

    // Signed axis slots ±s·e_a: distinct slots are at least √2·s apart.
    let s = spec.class_separation / std::f64::consts::SQRT_2;
    let mut slots: Vec<(usize, Real)> = (0..d).flat_map(|a| [(a, s), (a, -s)]).collect();
    slots.shuffle(&mut rng);
    let class_means: Vec<Vec<Real>> = slots[..spec.num_classes]
        .iter()
        .map(|&(axis, v)| {
            let mut m = vec![0.0; d];
            m[axis] = v;
            m
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| EnvError::Config(format!("noise distribution: {e}")))?;
    let total: usize = spec.class_counts.iter().sum();
    let mut features = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (c, &count) in spec.class_counts.iter().enumerate() {
        for _ in 0..count {
            features.push(
                class_means[c]
                    .iter()
                    .map(|&m| m + noise.sample(&mut rng))
                    .collect(),
            );
            labels.push(c);
        }
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut start = 0;
    for &count in &spec.class_counts {
        let mut idx: Vec<usize> = (start..start + count).collect();
        idx.shuffle(&mut rng);
        let n_train = ((count as Real * 0.70).round() as usize).clamp(1, count);
        let n_val = ((count as Real * 0.15).round() as usize).min(count - n_train);
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..n_train + n_val]);
        test.extend_from_slice(&idx[n_train + n_val..]);
        start += count;
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Ok(Dataset {
        num_classes: spec.num_classes,
        feature_dim: d,
        features,
        labels,
        class_means,
        train,
        val,
        test,
    })
}
