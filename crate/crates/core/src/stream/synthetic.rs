use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{InputShape, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Concern};

/// Gaussian blobs with unit covariance.
///
/// Class means sit at `separation · e_c` when `classes <= dims` (a scaled
/// simplex), otherwise at `separation` times random unit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dims: usize,
    pub separation: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub tasks: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            dims: 16,
            separation: 3.0,
            train_per_class: 250,
            test_per_class: 100,
            tasks: 2,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dims == 0 || self.tasks == 0 {
            return Err(Error::Config("synthetic classes, dims and tasks must be positive".into()));
        }
        if !self.classes.is_multiple_of(self.tasks) {
            return Err(Error::Config(format!(
                "{} classes cannot be split evenly into {} tasks",
                self.classes, self.tasks
            )));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config("synthetic sample counts must be positive".into()));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Config("separation must be a finite non-negative number".into()));
        }
        Ok(())
    }

    pub fn class_means(&self, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|c| {
                if self.classes <= self.dims {
                    let mut m = vec![0.0; self.dims];
                    m[c] = self.separation;
                    m
                } else {
                    let dir: Vec<f64> = (0..self.dims).map(|_| StandardNormal.sample(&mut *rng)).collect();
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    dir.iter().map(|v| v / norm * self.separation).collect()
                }
            })
            .collect()
    }

    /// `(train, test)` datasets, deterministic in `seed`.
    pub fn generate(&self, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        self.validate()?;
        let mut rng = rng_for(seed, Concern::Synthetic);
        let means = self.class_means(&mut rng);
        let mut draw = |per_class: usize| {
            let mut features = Vec::with_capacity(per_class * self.classes);
            let mut labels = Vec::with_capacity(per_class * self.classes);
            for (c, mean) in means.iter().enumerate() {
                for _ in 0..per_class {
                    let x: Vec<f64> = mean
                        .iter()
                        .map(|&m| {
                            let e: f64 = StandardNormal.sample(&mut rng);
                            m + e
                        })
                        .collect();
                    features.push(Arc::<[f64]>::from(x));
                    labels.push(c);
                }
            }
            LabeledDataset::new(InputShape::Vector(self.dims), self.classes, features, labels)
        };
        let train = draw(self.train_per_class)?;
        let test = draw(self.test_per_class)?;
        Ok((train, test))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let spec = SyntheticSpec::default();
        let (a, t) = spec.generate(1).unwrap();
        let (b, _) = spec.generate(1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
        assert_eq!(t.len(), 400);
        assert_ne!(a, spec.generate(2).unwrap().0);
    }

    #[test]
    fn empirical_means_near_targets() {
        let spec = SyntheticSpec {
            train_per_class: 2000,
            ..SyntheticSpec::default()
        };
        let (train, _) = spec.generate(5).unwrap();
        for c in 0..spec.classes {
            let rows: Vec<_> = (0..train.len()).filter(|&i| train.labels[i] == c).collect();
            let m: f64 = rows.iter().map(|&i| train.features[i][c]).sum::<f64>() / rows.len() as f64;
            assert!((m - 3.0).abs() < 0.1, "class {c} mean {m}");
        }
    }

    #[test]
    fn indivisible_classes_rejected() {
        let spec = SyntheticSpec {
            classes: 5,
            tasks: 2,
            ..SyntheticSpec::default()
        };
        assert!(spec.generate(0).is_err());
    }

    #[test]
    fn random_directions_when_classes_exceed_dims() {
        let spec = SyntheticSpec {
            classes: 6,
            dims: 3,
            tasks: 3,
            ..SyntheticSpec::default()
        };
        let mut rng = rng_for(0, Concern::Synthetic);
        for m in spec.class_means(&mut rng) {
            let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 3.0).abs() < 1e-9);
        }
    }
}
