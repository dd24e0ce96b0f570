use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Layout of one input row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputShape {
    Vector(usize),
    /// Channel-planar image: `channels` planes of `height × width`.
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
}

impl InputShape {
    pub fn len(&self) -> usize {
        match *self {
            InputShape::Vector(d) => d,
            InputShape::Image {
                channels,
                height,
                width,
            } => channels * height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Features with ground-truth labels. Source ids are row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub shape: InputShape,
    pub classes: usize,
    pub features: Vec<Arc<[f64]>>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(shape: InputShape, classes: usize, features: Vec<Arc<[f64]>>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(f) = features.iter().find(|f| f.len() != shape.len()) {
            return Err(Error::Config(format!(
                "feature row of length {} does not match input shape {shape:?}",
                f.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self {
            shape,
            classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Restrict to rows whose label is in `classes`, preserving order.
    pub fn filter_classes(&self, classes: &[usize]) -> TestSet {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        TestSet {
            features: keep.iter().map(|&i| Arc::clone(&self.features[i])).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            dim: self.shape.len(),
        }
    }
}

/// Held-out examples of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub features: Vec<Arc<[f64]>>,
    pub labels: Vec<usize>,
    pub dim: usize,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `range` stacked into a `[n, dim]` tensor.
    pub fn batch(&self, range: std::ops::Range<usize>) -> Result<Tensor> {
        stack_rows(self.features[range].iter().map(|f| f.as_ref()), self.dim)
    }
}

pub(crate) fn stack_rows<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        data.extend_from_slice(r);
        n += 1;
    }
    Tensor::matrix(n, dim, data)
}
