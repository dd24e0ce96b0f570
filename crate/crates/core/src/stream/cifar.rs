//! CIFAR binary-format ingestion.
//!
//! Records are one label byte (CIFAR-10) or two (CIFAR-100: coarse, fine)
//! followed by 3072 pixel bytes: R, G and B planes of 32×32, row-major.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dataset::{InputShape, LabeledDataset};
use crate::error::{Error, Result};

pub const PIXELS: usize = 3 * 32 * 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CifarVariant {
    Cifar10,
    /// Uses the fine (100-way) label.
    Cifar100,
}

impl CifarVariant {
    pub fn label_bytes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1,
            CifarVariant::Cifar100 => 2,
        }
    }

    pub fn record_len(self) -> usize {
        self.label_bytes() + PIXELS
    }

    pub fn classes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }

    pub fn train_files(self) -> &'static [&'static str] {
        match self {
            CifarVariant::Cifar10 => &[
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            CifarVariant::Cifar100 => &["train.bin"],
        }
    }

    pub fn test_file(self) -> &'static str {
        match self {
            CifarVariant::Cifar10 => "test_batch.bin",
            CifarVariant::Cifar100 => "test.bin",
        }
    }
}

/// Decode raw CIFAR bytes. `path` is only used in error messages.
pub fn parse_cifar(bytes: &[u8], variant: CifarVariant, path: &Path) -> Result<LabeledDataset> {
    let rec = variant.record_len();
    let data_err = |offset: usize, reason: String| Error::Data {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    if bytes.is_empty() {
        return Err(data_err(0, "empty file".into()));
    }
    if !bytes.len().is_multiple_of(rec) {
        let start = bytes.len() / rec * rec;
        return Err(data_err(
            start,
            format!(
                "truncated record: {} trailing bytes, expected {rec}",
                bytes.len() - start
            ),
        ));
    }
    let n = bytes.len() / rec;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (r, chunk) in bytes.chunks_exact(rec).enumerate() {
        let label = chunk[variant.label_bytes() - 1] as usize;
        if label >= variant.classes() {
            return Err(data_err(
                r * rec + variant.label_bytes() - 1,
                format!("label {label} out of range for {} classes", variant.classes()),
            ));
        }
        labels.push(label);
        let px: Vec<f64> = chunk[variant.label_bytes()..]
            .iter()
            .map(|&b| f64::from(b) / 255.0)
            .collect();
        features.push(Arc::<[f64]>::from(px));
    }
    LabeledDataset::new(
        InputShape::Image {
            channels: 3,
            height: 32,
            width: 32,
        },
        variant.classes(),
        features,
        labels,
    )
}

pub fn load_cifar_binary(path: &Path, variant: CifarVariant) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cifar(&bytes, variant, path)
}

/// Load the standard train and test files from `dir`.
pub fn load_cifar_dir(dir: &Path, variant: CifarVariant) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train: Option<LabeledDataset> = None;
    for name in variant.train_files() {
        let part = load_cifar_binary(&dir.join(name), variant)?;
        match &mut train {
            None => train = Some(part),
            Some(t) => {
                t.features.extend(part.features);
                t.labels.extend(part.labels);
            }
        }
    }
    let test = load_cifar_binary(&dir.join(variant.test_file()), variant)?;
    Ok((train.expect("at least one train file"), test))
}

/// Per-channel standardization with statistics from `reference`.
pub fn standardize(datasets: &mut [&mut LabeledDataset], reference_index: usize) {
    let InputShape::Image { channels, height, width } = datasets[reference_index].shape else {
        return;
    };
    let plane = height * width;
    let mut mean = vec![0.0; channels];
    let mut sq = vec![0.0; channels];
    let reference = &datasets[reference_index];
    let count = (reference.len() * plane) as f64;
    for f in &reference.features {
        for c in 0..channels {
            for &v in &f[c * plane..(c + 1) * plane] {
                mean[c] += v;
                sq[c] += v * v;
            }
        }
    }
    let std: Vec<f64> = (0..channels)
        .map(|c| {
            mean[c] /= count;
            (sq[c] / count - mean[c] * mean[c]).max(1e-12).sqrt()
        })
        .collect();
    for ds in datasets.iter_mut() {
        for f in ds.features.iter_mut() {
            let v: Vec<f64> = f
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let c = k / plane;
                    (x - mean[c]) / std[c]
                })
                .collect();
            *f = Arc::from(v);
        }
    }
}
